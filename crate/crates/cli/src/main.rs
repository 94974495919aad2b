use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mdiqss::keyrate::{self, BaselineModel};
use mdiqss::montecarlo;
use mdiqss::params::load_config;
use mdiqss::{Error, Q111Convention, SimParams64};

#[derive(Parser, Debug)]
#[command(name = "mdiqss", version, about = "Memory-assisted MDI-QSS simulator")]
struct Cli {
    /// Parameter file (`key = value` lines); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file, or `stdout`.
    #[arg(long, global = true, default_value = "stdout")]
    out: String,

    /// Coefficient turning the yield bound into a gain bound.
    #[arg(long, global = true, value_enum, default_value_t = ConventionArg::Literal)]
    q111_convention: ConventionArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ConventionArg {
    Literal,
    Triple,
}

impl From<ConventionArg> for Q111Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Literal => Q111Convention::Literal,
            ConventionArg::Triple => Q111Convention::TripleThermal,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Three-party synchronization probability over a sweep.
    SyncProb(SweepArgs),
    /// Full key-rate report at one distance.
    Keyrate {
        /// Arm length in km; defaults to the config value.
        #[arg(long = "l-km", alias = "L")]
        l_km: Option<f64>,
        #[arg(long, default_value = "QM_HSPS")]
        variant: VariantSpec,
    },
    /// Key rate versus distance with a cutoff summary.
    Sweep(SweepArgs),
    /// Monte Carlo against the analytic synchronization model.
    McValidate {
        #[arg(long, default_value_t = 10_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Largest distance with positive key.
    MaxDistance {
        #[arg(long = "variant", default_value = "QM_HSPS")]
        variants: Vec<VariantSpec>,
    },
    /// Memory survival at which memory-assisted synchronization matches
    /// the weak-coherent baseline.
    TqmThreshold {
        #[arg(long, default_value_t = 200.0)]
        l_ref: f64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepVar {
    #[value(name = "L_km")]
    LKm,
    #[value(name = "T_QM")]
    TQm,
    #[value(name = "N")]
    N,
}

impl SweepVar {
    fn name(self) -> &'static str {
        match self {
            Self::LKm => "L_km",
            Self::TQm => "T_QM",
            Self::N => "N",
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "L_km")]
    var: SweepVar,
    #[arg(long, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, allow_negative_numbers = true)]
    stop: f64,
    #[arg(long)]
    step: f64,
    /// `NAME` or `NAME@T_QM`; repeatable.
    #[arg(long = "variant", default_value = "QM_HSPS")]
    variants: Vec<VariantSpec>,
}

/// A variant with an optional memory-survival override.
#[derive(Clone, Debug)]
struct VariantSpec {
    label: String,
    model: BaselineModel,
    t_qm: Option<f64>,
}

impl std::str::FromStr for VariantSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, t_qm) = match s.split_once('@') {
            Some((n, t)) => {
                let t: f64 = t.parse().map_err(|_| format!("bad T_QM override in `{s}`"))?;
                (n, Some(t))
            }
            None => (s, None),
        };
        let model = name.parse::<BaselineModel>().map_err(|e| e.to_string())?;
        Ok(Self {
            label: s.to_string(),
            model,
            t_qm,
        })
    }
}

impl VariantSpec {
    fn apply(&self, p: &SimParams64) -> Result<SimParams64> {
        let mut p = *p;
        if let Some(t) = self.t_qm {
            p.t_qm = t;
            p.validate().with_context(|| format!("variant `{}`", self.label))?;
        }
        Ok(p)
    }
}

impl SweepArgs {
    fn values(&self) -> Result<Vec<f64>> {
        ensure!(self.start.is_finite() && self.stop.is_finite(), "sweep bounds must be finite");
        ensure!(self.start <= self.stop, "sweep start {} exceeds stop {}", self.start, self.stop);
        ensure!(self.step > 0.0 && self.step.is_finite(), "sweep step must be positive");
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

fn set_var(p: &SimParams64, var: SweepVar, value: f64) -> Result<SimParams64> {
    let mut p = *p;
    match var {
        SweepVar::LKm => p.l_km = value,
        SweepVar::TQm => p.t_qm = value,
        SweepVar::N => {
            ensure!(value >= 1.0 && value.fract() == 0.0, "N must be a positive integer, got {value}");
            p.n_slots = value as usize;
        }
    }
    p.validate().with_context(|| format!("{} = {value}", var.name()))?;
    Ok(p)
}

fn open_output(target: &str) -> Result<Box<dyn Write>> {
    if target == "stdout" || target == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let f = File::create(target).with_context(|| format!("cannot create `{target}`"))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn sync_prob(out: &mut dyn Write, params: &SimParams64, args: &SweepArgs) -> Result<()> {
    let values = args.values()?;
    if args.var == SweepVar::TQm && args.variants.iter().any(|v| v.t_qm.is_some()) {
        bail!("a T_QM override conflicts with a T_QM sweep");
    }
    let mut rows = Vec::new();
    for &value in &values {
        for v in &args.variants {
            let p = set_var(&v.apply(params)?, args.var, value)?;
            let ps3 = keyrate::baseline_sync(v.model, &p, p.l_km)?;
            rows.push(format!("{},{value},{},{ps3:e}", args.var.name(), v.label));
        }
    }
    writeln!(out, "variable,value,variant,Ps3")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn sweep(out: &mut dyn Write, params: &SimParams64, args: &SweepArgs, c: Q111Convention) -> Result<()> {
    ensure!(args.var == SweepVar::LKm, "key-rate sweeps run over L_km only");
    let values = args.values()?;
    for &l in &values {
        set_var(params, SweepVar::LKm, l)?;
    }
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    for v in &args.variants {
        let p = v.apply(params)?;
        rows.push((v, keyrate::sweep_rates(&p, &values, v.model, c)?));
        let summary = match keyrate::max_distance(&p, v.model, c) {
            Ok(d) => format!("# max_distance {} {d:.1} km", v.label),
            Err(e @ (Error::NoKeyAtZero | Error::NoCutoff(_))) => format!("# max_distance {} none: {e}", v.label),
            Err(e) => return Err(e.into()),
        };
        footer.push(summary);
    }
    writeln!(out, "L_km,variant,Ps3,Q_X_mu,E_X_mu,Q111_XL,e111_BZU,R_raw,R")?;
    for (i, &l) in values.iter().enumerate() {
        for (v, pts) in &rows {
            let r = &pts[i];
            writeln!(
                out,
                "{l},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                v.label, r.ps3, r.q_x_mu, r.e_x_mu, r.q111_xl, r.e111_bzu, r.r_raw, r.r
            )?;
        }
    }
    writeln!(out, "# q111_convention {c}")?;
    for line in footer {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn field(out: &mut dyn Write, key: &str, value: impl Display) -> io::Result<()> {
    writeln!(out, "{key} = {value}")
}

fn run(cli: Cli) -> Result<()> {
    let params: SimParams64 = match &cli.config {
        Some(path) => load_config(path).with_context(|| format!("config `{}`", path.display()))?,
        None => SimParams64::default(),
    };
    params.validate()?;
    let c = Q111Convention::from(cli.q111_convention);
    let mut out = open_output(&cli.out)?;
    let out: &mut dyn Write = &mut out;
    match &cli.command {
        Command::SyncProb(args) => sync_prob(out, &params, args)?,
        Command::Sweep(args) => sweep(out, &params, args, c)?,
        Command::Keyrate { l_km, variant } => {
            let p = variant.apply(&set_var(&params, SweepVar::LKm, l_km.unwrap_or(params.l_km))?)?;
            let r = keyrate::rate_point(&p, p.l_km, variant.model, c)?;
            field(out, "variant", &variant.label)?;
            field(out, "q111_convention", c)?;
            field(out, "L_km", r.l_km)?;
            field(out, "Ps3", format_args!("{:e}", r.ps3))?;
            field(out, "Q_X_mu", format_args!("{:e}", r.q_x_mu))?;
            field(out, "E_X_mu", format_args!("{:e}", r.e_x_mu))?;
            field(out, "Q111_XL", format_args!("{:e}", r.q111_xl))?;
            field(out, "e111_BZU", format_args!("{:e}", r.e111_bzu))?;
            field(out, "bounds_valid", r.bounds_valid)?;
            field(out, "R_raw", format_args!("{:e}", r.r_raw))?;
            field(out, "R", format_args!("{:e}", r.r))?;
            field(out, "R_bits_per_s", format_args!("{:e}", r.r_bits_per_s))?;
        }
        Command::McValidate { trials, seed } => {
            ensure!(*trials >= 1, "trials must be at least 1");
            let rows = montecarlo::validate_sync(&params, *seed, *trials)?;
            writeln!(out, "L_km,N,T_QM,analytic,mc,std_err,z")?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{:e},{:e},{:e},{:e}",
                    r.l_km,
                    r.n_slots,
                    r.t_qm,
                    r.analytic,
                    r.estimate.mean(),
                    r.estimate.std_err(),
                    r.z
                )?;
            }
            let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
            let verdict = if worst <= 3.0 { "PASS" } else { "FAIL" };
            writeln!(out, "# trials {trials} seed {seed} max_abs_z {worst:e} {verdict}")?;
        }
        Command::MaxDistance { variants } => {
            writeln!(out, "variant,max_distance_km")?;
            for v in variants {
                let d = keyrate::max_distance(&v.apply(&params)?, v.model, c)?;
                writeln!(out, "{},{d:e}", v.label)?;
            }
        }
        Command::TqmThreshold { l_ref } => {
            let t = keyrate::tqm_threshold(&params, *l_ref)?;
            field(out, "L_ref_km", l_ref)?;
            field(out, "T_QM_threshold", format_args!("{t:e}"))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
