//! Command execution: resolved configuration in, CSV or JSON bytes out.

use std::f64::consts::PI;
use std::io::Write;

use ddmag_core::decay::{envelope_re_at, gamma2_long_tc, DecayCurve};
use ddmag_core::dynamics::{mc_signal_by_cycle, McConfig, OuNoise, Readout, TrajectoryResult};
use ddmag_core::response::{passbands, PassBand, PhaseSpec, WeightProfile};
use ddmag_core::sensitivity::{
    scan, write_scan_csv, Band, CycleChoice, DecayModel, ScanAxis, ScanRow, ScanSpec, SensorParams,
};
use ddmag_core::table::fmt_float;
use ddmag_core::{Execution, Scheme, SequenceSpec, VERSION};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_range, AxisArg, BandArg, CommandKind, DecayArg, Format, RunConfig};
use crate::error::CliError;

/// Largest Monte Carlo ensemble accepted.
pub const MAX_TRAJECTORIES: usize = 1_000_000;

/// Result of a run: the document to write and diagnostics for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub document: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Runs a resolved configuration (see [`RunConfig::resolve`]).
pub fn execute(cfg: &RunConfig, exec: Execution) -> Result<Output, CliError> {
    let command = cfg
        .command
        .ok_or_else(|| CliError::Config("configuration has no command".into()))?;
    let ctx = Context::new(cfg)?;
    let mut warnings = Vec::new();
    let body = match command {
        CommandKind::Weight => weight(&ctx, exec)?,
        CommandKind::Passbands => passband_table(&ctx)?,
        CommandKind::Decay => decay(&ctx, exec, &mut warnings)?,
        CommandKind::Montecarlo => montecarlo(&ctx, exec)?,
        CommandKind::Sensitivity => sensitivity(&ctx, exec)?,
    };
    let document = match ctx.format {
        Format::Csv => {
            let mut out = csv_header(cfg, command);
            out.extend_from_slice(&body.csv);
            out
        }
        Format::Json => {
            let doc = json!({
                "ddmag_version": VERSION,
                "command": command.name(),
                "config": cfg.provenance(),
                "data": body.json,
            });
            let mut out = serde_json::to_vec_pretty(&doc)
                .map_err(|e| CliError::Io(format!("serializing output: {e}")))?;
            out.push(b'\n');
            out
        }
    };
    Ok(Output { document, warnings })
}

fn csv_header(cfg: &RunConfig, command: CommandKind) -> Vec<u8> {
    let config = serde_json::to_string(&cfg.provenance()).expect("config serializes");
    format!(
        "# ddmag {VERSION}\n# command: {}\n# config: {config}\n",
        command.name()
    )
    .into_bytes()
}

struct Body {
    csv: Vec<u8>,
    json: serde_json::Value,
}

/// Resolved numeric inputs in SI / rad s⁻¹.
struct Context<'a> {
    cfg: &'a RunConfig,
    format: Format,
    rabi: f64,
    unit: f64,
    k: u32,
    n: u32,
}

/// A scheme entry with its display label.
#[derive(Debug, Clone, Copy)]
struct Entry {
    scheme: Scheme,
    label: &'static str,
    k_label: Option<u32>,
}

impl Entry {
    fn label(&self) -> String {
        match self.k_label {
            Some(k) => format!("re_k{k}"),
            None => self.label.to_string(),
        }
    }
}

impl<'a> Context<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self, CliError> {
        let unit = cfg.units.unwrap_or_default().to_rad_s();
        let rabi = cfg.rabi.unwrap_or(1.0e6) * unit;
        if !(rabi.is_finite() && rabi > 0.0) {
            return Err(CliError::Config(format!(
                "Rabi frequency must be > 0, got {:?}",
                cfg.rabi
            )));
        }
        let k = cfg.k.unwrap_or(1);
        if k == 0 {
            return Err(CliError::Config("k must be >= 1".into()));
        }
        Ok(Self {
            cfg,
            format: cfg.format.unwrap_or(Format::Csv),
            rabi,
            unit,
            k,
            n: cfg.n.unwrap_or(1),
        })
    }

    fn schemes(&self) -> Result<Vec<Entry>, CliError> {
        let names = self.cfg.schemes.clone().unwrap_or_else(|| vec!["re".into()]);
        if names.is_empty() {
            return Err(CliError::Config("at least one scheme is required".into()));
        }
        let mut entries = Vec::new();
        for name in &names {
            let mut scheme: Scheme = name.parse()?;
            if let Scheme::RotaryEcho { .. } = scheme {
                if !name.contains(':') {
                    scheme = Scheme::RotaryEcho { k: self.k };
                }
            }
            let entry = Entry {
                scheme,
                label: scheme.name(),
                k_label: scheme.echo_index(),
            };
            if entries.iter().any(|e: &Entry| e.label() == entry.label()) {
                return Err(CliError::Config(format!("scheme {} listed twice", entry.label())));
            }
            entries.push(entry);
        }
        Ok(entries)
    }

    /// PDD period: explicit, else the 2πk rotary-echo period at the Rabi
    /// frequency.
    fn pdd_period(&self) -> f64 {
        self.cfg
            .period
            .unwrap_or(4.0 * PI * self.k as f64 / self.rabi)
    }

    fn period_of(&self, scheme: Scheme) -> Result<f64, CliError> {
        match scheme.period_for_rabi(self.rabi) {
            None => Ok(self.pdd_period()),
            Some(derived) => {
                if let Some(p) = self.cfg.period {
                    if (p - derived).abs() > 1e-9 * derived {
                        return Err(CliError::Config(format!(
                            "period {p} s contradicts the {} period {derived} s at the given Rabi frequency",
                            scheme.name()
                        )));
                    }
                }
                Ok(derived)
            }
        }
    }

    fn sequence(&self, scheme: Scheme, cycles: u32) -> Result<SequenceSpec, CliError> {
        let period = self.period_of(scheme)?;
        Ok(match scheme {
            Scheme::Pdd => SequenceSpec::pdd(period, cycles)?,
            other => SequenceSpec::with_rabi(other, self.rabi, cycles)?,
        })
    }

    fn noise(&self) -> Result<(f64, f64), CliError> {
        match (self.cfg.sigma, self.cfg.tau_c) {
            (Some(s), Some(t)) => Ok((s * self.unit, t)),
            _ => Err(CliError::Config(format!(
                "the {} command needs sigma and tau_c",
                self.cfg.command.map_or("", CommandKind::name)
            ))),
        }
    }

    fn trajectories(&self) -> Result<usize, CliError> {
        let t = self.cfg.trajectories.unwrap_or(0);
        if t > MAX_TRAJECTORIES {
            return Err(CliError::Config(format!(
                "at most {MAX_TRAJECTORIES} trajectories are accepted, got {t}"
            )));
        }
        Ok(t)
    }

    fn mc_config(&self, trajectories: usize, exec: Execution) -> McConfig {
        McConfig::new(trajectories)
            .steps_per_period(self.cfg.steps_per_period.unwrap_or(4096))
            .exec(exec)
    }
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("output data serialize")
}

fn weight(ctx: &Context, exec: Execution) -> Result<Body, CliError> {
    let entries = ctx.schemes()?;
    let grid = parse_range(ctx.cfg.grid.as_deref().unwrap_or("0.05:4.0:2000"))?;
    if grid.iter().any(|&x| !(x > 0.0)) {
        return Err(CliError::Config("frequency grid must be positive".into()));
    }
    let omegas: Vec<f64> = grid.iter().map(|x| x * ctx.rabi).collect();
    let mut profiles = Vec::new();
    for e in &entries {
        let seq = ctx.sequence(e.scheme, ctx.n)?;
        let mut p = WeightProfile::compute(&seq, &omegas, exec)?;
        p.reference_omega = ctx.rabi;
        profiles.push(p);
    }

    let mut csv = Vec::new();
    let columns: Vec<String> = if entries.len() == 1 {
        vec!["W".into()]
    } else {
        entries.iter().map(|e| format!("W_{}", e.label())).collect()
    };
    writeln!(csv, "omega_rad_s,omega_over_Omega,{}", columns.join(","))?;
    for (i, w) in omegas.iter().enumerate() {
        write!(csv, "{},{}", fmt_float(*w), fmt_float(grid[i]))?;
        for p in &profiles {
            write!(csv, ",{}", fmt_float(p.weight[i]))?;
        }
        writeln!(csv)?;
    }
    Ok(Body {
        csv,
        json: to_json(&profiles),
    })
}

#[derive(Serialize)]
struct PassbandSet {
    k: u32,
    n: u32,
    period_s: f64,
    rabi_rad_s: f64,
    bands: Vec<PassBand>,
}

fn passband_table(ctx: &Context) -> Result<Body, CliError> {
    let scheme = Scheme::RotaryEcho { k: ctx.k };
    let period = scheme.period_for_rabi(ctx.rabi).expect("driven scheme");
    let bands = passbands(ctx.k, period, ctx.n, ctx.cfg.p_max.unwrap_or(5))?;
    let mut csv = Vec::new();
    writeln!(csv, "p,center_rad_s,center_over_Omega,height")?;
    for b in &bands {
        writeln!(
            csv,
            "{},{},{},{}",
            b.p,
            fmt_float(b.center),
            fmt_float(b.center / ctx.rabi),
            fmt_float(b.height)
        )?;
    }
    let set = PassbandSet {
        k: ctx.k,
        n: ctx.n,
        period_s: period,
        rabi_rad_s: ctx.rabi,
        bands,
    };
    Ok(Body {
        csv,
        json: to_json(&set),
    })
}

#[derive(Serialize)]
struct SchemeCurve {
    scheme: String,
    k: Option<u32>,
    n: u32,
    period_s: f64,
    curve: DecayCurve,
}

fn decay(ctx: &Context, exec: Execution, warnings: &mut Vec<String>) -> Result<Body, CliError> {
    let entries = ctx.schemes()?;
    let (sigma, tau_c) = ctx.noise()?;
    let trajectories = ctx.trajectories()?;
    let mut curves = Vec::new();
    for e in &entries {
        let seq = ctx.sequence(e.scheme, ctx.n)?;
        let period = seq.period();
        let t_s: Vec<f64> = (0..=ctx.n).map(|j| j as f64 * period).collect();
        let envelope = analytic_envelope(e.scheme, sigma, tau_c, ctx.n, period, warnings)?;
        let mc = if trajectories > 0 {
            let noise = OuNoise::new(sigma, tau_c, ctx.cfg.seed.unwrap_or(0))?;
            Some(mc_signal_by_cycle(&seq, &noise, &ctx.mc_config(trajectories, exec))?)
        } else {
            None
        };
        curves.push(SchemeCurve {
            scheme: e.scheme.name().to_string(),
            k: e.scheme.echo_index(),
            n: ctx.n,
            period_s: period,
            curve: DecayCurve { t_s, envelope, mc },
        });
    }

    let mut csv = Vec::new();
    let with_mc = trajectories > 0;
    write!(csv, "scheme,k,cycles,t_s,envelope")?;
    if with_mc {
        write!(csv, ",envelope_mc,envelope_mc_std_error")?;
    }
    writeln!(csv)?;
    for c in &curves {
        for (j, (t, d)) in c.curve.t_s.iter().zip(&c.curve.envelope).enumerate() {
            write!(
                csv,
                "{},{},{},{},{}",
                c.scheme,
                k_field(c.k),
                j,
                fmt_float(*t),
                fmt_float(*d)
            )?;
            if let Some(mc) = &c.curve.mc {
                let (v, err) = mc[j].contrast();
                write!(csv, ",{},{}", fmt_float(v), fmt_float(err))?;
            }
            writeln!(csv)?;
        }
    }
    Ok(Body {
        csv,
        json: to_json(&curves),
    })
}

/// Closed-form envelope after 0..=n cycles: the OU cumulant for rotary echo,
/// the long-correlation cubic law for PDD, NaN where no closed form exists.
fn analytic_envelope(
    scheme: Scheme,
    sigma: f64,
    tau_c: f64,
    n: u32,
    period: f64,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, CliError> {
    match scheme {
        Scheme::RotaryEcho { k } => {
            let mut out = Vec::with_capacity(n as usize + 1);
            for j in 0..=n {
                let c = ddmag_core::decay::cumulant_coeffs(sigma, tau_c, k, j, period)?;
                if c.ill_conditioned {
                    warnings.push(format!(
                        "cumulant coefficients lose precision at cycle {j} (tau_c/T = {})",
                        tau_c / period
                    ));
                }
                out.push(envelope_re_at(sigma, tau_c, k, j, period)?);
            }
            Ok(out)
        }
        Scheme::Pdd => {
            let g = gamma2_long_tc(scheme, sigma, tau_c)?;
            Ok((0..=n)
                .map(|j| {
                    if j == 0 {
                        1.0
                    } else {
                        let t = j as f64 * period;
                        (-(g * t).powi(3) / (j as f64).powi(2)).exp()
                    }
                })
                .collect())
        }
        _ => Ok(vec![f64::NAN; n as usize + 1]),
    }
}

fn k_field(k: Option<u32>) -> String {
    k.map_or(String::new(), |k| k.to_string())
}

#[derive(Serialize)]
struct SchemeSignal {
    scheme: String,
    k: Option<u32>,
    n: u32,
    period_s: f64,
    readout: String,
    signal: Vec<TrajectoryResult>,
}

fn montecarlo(ctx: &Context, exec: Execution) -> Result<Body, CliError> {
    let entries = ctx.schemes()?;
    let (sigma, tau_c) = ctx.noise()?;
    let trajectories = ctx.trajectories()?;
    let readout: Readout = ctx.cfg.readout.as_deref().unwrap_or("auto").parse()?;
    let noise = OuNoise::new(sigma, tau_c, ctx.cfg.seed.unwrap_or(0))?;
    let mut sets = Vec::new();
    for e in &entries {
        let seq = ctx.sequence(e.scheme, ctx.n)?;
        let cfg = ctx.mc_config(trajectories, exec).readout(readout);
        let signal = mc_signal_by_cycle(&seq, &noise, &cfg)?;
        sets.push(SchemeSignal {
            scheme: e.scheme.name().to_string(),
            k: e.scheme.echo_index(),
            n: ctx.n,
            period_s: seq.period(),
            readout: format!("{:?}", readout.resolve(&seq)).to_ascii_lowercase(),
            signal,
        });
    }
    let mut csv = Vec::new();
    writeln!(csv, "scheme,k,cycles,t_s,signal,std_error,count")?;
    for s in &sets {
        for (j, r) in s.signal.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                s.scheme,
                k_field(s.k),
                j,
                fmt_float(j as f64 * s.period_s),
                fmt_float(r.signal),
                fmt_float(r.std_error),
                r.count
            )?;
        }
    }
    Ok(Body {
        csv,
        json: to_json(&sets),
    })
}

fn sensitivity(ctx: &Context, exec: Execution) -> Result<Body, CliError> {
    let cfg = ctx.cfg;
    let entries = ctx.schemes()?;
    let axis = cfg.axis.unwrap_or(AxisArg::Time);
    let mut values = parse_range(cfg.range.as_deref().unwrap_or("5e-6:1e-3:200"))?;
    let scan_axis = match axis {
        AxisArg::Time => ScanAxis::Time,
        AxisArg::Frequency => {
            values.iter_mut().for_each(|v| *v *= ctx.unit);
            ScanAxis::Frequency
        }
        AxisArg::K => ScanAxis::EchoIndex,
        AxisArg::N => ScanAxis::Cycles,
    };
    let band = match cfg.band.unwrap_or(BandArg::Opt) {
        BandArg::Opt => Band::Optimal,
        BandArg::Low => Band::Low,
    };
    let cycles = match cfg.n_max {
        Some(max) => CycleChoice::Optimal { max },
        None => CycleChoice::Fixed(ctx.n),
    };
    let decay = decay_model(ctx)?;
    let sensor = SensorParams::new(
        cfg.gamma
            .unwrap_or(ddmag_core::sensitivity::ELECTRON_GYROMAGNETIC_RATIO),
        cfg.c
            .unwrap_or(ddmag_core::sensitivity::DEFAULT_READOUT_EFFICIENCY),
    )?;

    let mut rows: Vec<ScanRow> = Vec::new();
    for e in &entries {
        let spec = ScanSpec {
            axis: scan_axis,
            values: values.clone(),
            scheme: e.scheme,
            band,
            phase: phase_spec(cfg.phase.as_deref().unwrap_or("optimal"), e.scheme)?,
            cycles,
            period: Some(ctx.period_of(e.scheme)?),
            rabi: Some(ctx.rabi),
            decay,
            sensor,
            exec,
        };
        rows.extend(scan(&spec)?);
    }
    if scan_axis == ScanAxis::Frequency {
        rows.iter_mut().for_each(|r| r.axis_value /= ctx.unit);
    }
    if rows.iter().all(|r| !r.result.is_detectable()) {
        return Err(CliError::Numerical(
            "no scan point is detectable (stop band, divergent phase penalty or vanished envelope)"
                .into(),
        ));
    }
    let mut csv = Vec::new();
    write_scan_csv(&rows, &mut csv)?;
    Ok(Body {
        csv,
        json: to_json(&rows),
    })
}

fn decay_model(ctx: &Context) -> Result<DecayModel, CliError> {
    let cfg = ctx.cfg;
    let need_t2 = || {
        cfg.t2
            .ok_or_else(|| CliError::Config("the cubic decay model needs t2".into()))
    };
    Ok(match cfg.decay_model.unwrap_or(DecayArg::Noiseless) {
        DecayArg::Noiseless => DecayModel::Noiseless,
        DecayArg::Cubic => DecayModel::Cubic { t2: need_t2()? },
        DecayArg::LongTc => {
            let (sigma, tau_c) = ctx.noise()?;
            DecayModel::LongCorrelation { sigma, tau_c }
        }
        DecayArg::Ou => {
            let (sigma, tau_c) = ctx.noise()?;
            DecayModel::Ou { sigma, tau_c }
        }
        DecayArg::Mc => {
            let (sigma, tau_c) = ctx.noise()?;
            let trajectories = ctx.trajectories()?;
            DecayModel::MonteCarlo {
                noise: OuNoise::new(sigma, tau_c, cfg.seed.unwrap_or(0))?,
                trajectories,
                steps_per_period: cfg.steps_per_period.unwrap_or(4096),
            }
        }
    })
}

fn phase_spec(text: &str, scheme: Scheme) -> Result<PhaseSpec, CliError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "optimal" => Ok(PhaseSpec::Fixed(scheme.optimal_phase())),
        "unknown" => Ok(PhaseSpec::Unknown),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .map(PhaseSpec::Fixed)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "phase must be a number (rad), optimal or unknown; got {text:?}"
                ))
            }),
    }
}
