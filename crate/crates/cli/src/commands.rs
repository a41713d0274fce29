use std::path::Path;

use cvdist_core::channels::{
    attenuation, choi_from_truncated_epr, discard_and_replace, filter, make_separable_channel, random_locc_spec,
    PartyPorts,
};
use cvdist_core::entanglement::{log_negativity, BipartiteSplit};
use cvdist_core::io::{from_json, to_json, CanonicalReport, ChannelDoc, Fig1Report, Fig2Report, StateDoc, SymplecticDoc};
use cvdist_core::nogo::{optimize, sweep_csv, NogoCertificate, NogoInput, SearchConfig, SymplecticParams, GAP_TOL};
use cvdist_core::protocols::{build_fig2, canonicalize_pure_3mode, run_fig1, Fig1Options, HeterodyneOutcome};
use cvdist_core::state::{add_noise, thermal, tmsv, vacuum};
use cvdist_core::{Error, GaussianState, SymplecticMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::files::{emit, read_json, read_text};
use crate::{
    CanonArgs, ChannelApplyArgs, ChannelCommand, ChannelKind, ChannelMakeArgs, Command, EntanglementArgs, Fig1Args,
    Fig2Args, NogoArgs, StateArgs, StateKind,
};

/// Tolerance of the deterministic-implementation check.
pub const FIG1_TOL: f64 = 1e-9;
/// Slack before a protocol output counts as more entangled than its input.
pub const FIG2_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn violation(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotPhysical { .. }
            | Error::NotPhysicalWitness(_)
            | Error::NotPositiveDefinite { .. }
            | Error::SingularConditioning { .. }
            | Error::DegenerateQuadrature { .. } => 3,
            Error::Dimension(_)
            | Error::DimensionMismatch { .. }
            | Error::TooManyModes { .. }
            | Error::NotThreeMode(_)
            | Error::InvalidSplit(_)
            | Error::InvalidModes(_)
            | Error::EmptyKeepSet => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::State(a) => state(a),
        Command::Channel(ChannelCommand::Make(a)) => channel_make(a),
        Command::Channel(ChannelCommand::Apply(a)) => channel_apply(a),
        Command::Entanglement(a) => entanglement(a),
        Command::Fig1(a) => fig1(a),
        Command::Fig2(a) => fig2(a),
        Command::Nogo(a) => nogo(a),
        Command::Canon(a) => canon(a),
    }
}

fn load_state(path: &Path) -> Result<GaussianState<f64>> {
    Ok(read_json::<StateDoc>(path)?.to_state()?)
}

fn emit_json<S: serde::Serialize>(path: Option<&Path>, doc: &S) -> Result<()> {
    emit(path, &to_json(doc)?)
}

fn state(a: StateArgs) -> Result<()> {
    let st = match a.kind {
        StateKind::Vacuum => vacuum(a.modes)?,
        StateKind::Tmsv => {
            if !a.r.is_finite() {
                return Err(CliError::usage("--r must be finite"));
            }
            tmsv(a.r)
        }
        StateKind::Thermal => {
            if a.nu.is_empty() {
                return Err(CliError::usage("thermal needs --nu"));
            }
            thermal(&a.nu)?
        }
        StateKind::CustomJson => {
            let path = a.input.as_deref().ok_or_else(|| CliError::usage("custom-json needs --input"))?;
            load_state(path)?
        }
    };
    emit_json(a.out.as_deref(), &StateDoc::from_state(&st))
}

fn channel_make(a: ChannelMakeArgs) -> Result<()> {
    let ch = match a.kind {
        ChannelKind::Identity => choi_from_truncated_epr(a.modes, a.r)?,
        ChannelKind::Filter => filter(a.r)?,
        ChannelKind::Attenuation => attenuation(a.eta, a.nu, a.r)?,
        ChannelKind::Discard => discard_and_replace(a.modes, &thermal(&[a.nu])?)?,
        ChannelKind::RandomSeparable => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let ports = PartyPorts { n_in: 1, n_out: 1 };
            make_separable_channel(&random_locc_spec(ports, ports, 0.5, 0.5, 0.3, &mut rng))?
        }
    };
    emit_json(a.out.as_deref(), &ChannelDoc::from_channel(&ch))
}

fn channel_apply(a: ChannelApplyArgs) -> Result<()> {
    let ch = read_json::<ChannelDoc>(&a.channel)?.to_channel()?;
    let st = load_state(&a.state)?;
    let out = if a.on.is_empty() {
        ch.apply(&st)?
    } else {
        ch.apply_on_modes(&st, &a.on)?
    };
    emit_json(a.out.as_deref(), &StateDoc::from_state(&out))
}

fn split_for(modes: usize, alice: &[usize], bob: &[usize]) -> Result<BipartiteSplit> {
    let alice = if alice.is_empty() { vec![0] } else { alice.to_vec() };
    let bob = if bob.is_empty() {
        (0..modes).filter(|m| !alice.contains(m)).collect()
    } else {
        bob.to_vec()
    };
    Ok(BipartiteSplit::new(alice, bob, modes)?)
}

fn entanglement(a: EntanglementArgs) -> Result<()> {
    let st = load_state(&a.state)?;
    let split = split_for(st.modes(), &a.alice, &a.bob)?;
    let report = log_negativity(&st, &split)?;
    if !report.ppt_sufficient {
        eprintln!("note: PPT is only necessary for separability across this split");
    }
    emit_json(a.out.as_deref(), &report)
}

fn fig1(a: Fig1Args) -> Result<()> {
    let ch = read_json::<ChannelDoc>(&a.channel)?.to_channel()?;
    let st = load_state(&a.state)?;
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    let run = run_fig1(&ch, &st, a.samples, a.seed, Fig1Options { gain_scale: a.gain_scale })?;
    let report = Fig1Report::new(&run, a.seed, a.gain_scale, FIG1_TOL);
    if let Some(p) = a.out.as_deref() {
        emit_json(Some(p), &report)?;
    }
    println!(
        "samples={} max_cov_deviation={:e} max_mean_deviation={:e} tolerance={:e}",
        report.n_samples, report.max_cov_deviation, report.max_mean_deviation, FIG1_TOL
    );
    if report.verified {
        Ok(())
    } else {
        Err(CliError::violation(
            "corrected outputs do not reproduce the channel output",
        ))
    }
}

fn load_params(path: &Path) -> Result<SymplecticParams> {
    let text = read_text(path)?;
    if let Ok(cert) = from_json::<NogoCertificate>(&text) {
        return Ok(cert.best_params);
    }
    from_json::<SymplecticParams>(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_symplectic(path: Option<&Path>) -> Result<SymplecticMatrix<f64>> {
    match path {
        None => Ok(SymplecticMatrix::identity(2)),
        Some(p) => Ok(read_json::<SymplecticDoc>(p)?.to_symplectic()?),
    }
}

fn fig2(a: Fig2Args) -> Result<()> {
    let copy1 = load_state(&a.copy1)?;
    let copy2 = match a.copy2.as_deref() {
        Some(p) => load_state(p)?,
        None => copy1.clone(),
    };
    let (s_a, s_b) = match a.params.as_deref() {
        Some(p) => {
            let params = load_params(p)?;
            (params.alice.symplectic()?, params.bob.symplectic()?)
        }
        None => (load_symplectic(a.s_a.as_deref())?, load_symplectic(a.s_b.as_deref())?),
    };
    let outcomes = if a.sample_outcomes {
        HeterodyneOutcome::Sampled { seed: a.seed }
    } else {
        HeterodyneOutcome::Zero
    };
    let input = NogoInput::new("", copy1.clone(), copy2.clone());
    let input_e_n = input.input_log_negativity()?;
    let p = build_fig2(&s_a, &s_b, &copy1, &copy2, &outcomes)?;
    let report = Fig2Report::new(&p, input_e_n);
    emit_json(a.out.as_deref(), &report)?;
    if p.report.log_negativity > input_e_n + FIG2_TOL {
        return Err(CliError::violation(format!(
            "output log-negativity {} exceeds input {}",
            p.report.log_negativity, input_e_n
        )));
    }
    Ok(())
}

fn nogo(a: NogoArgs) -> Result<()> {
    if a.starts == 0 {
        return Err(CliError::usage("--starts must be at least 1"));
    }
    let config = SearchConfig {
        n_starts: a.starts,
        budget: a.budget,
        seed: a.seed,
    };
    let certs: Vec<(f64, NogoCertificate)> = match (&a.rs, &a.copy) {
        (Some(rs), _) => rs
            .0
            .iter()
            .map(|&r| {
                let input = if a.noise > 0.0 {
                    NogoInput::noisy_tmsv_pair(r, a.noise)?
                } else {
                    NogoInput::tmsv_pair(r)
                };
                Ok((r, optimize(&input, &config)?))
            })
            .collect::<Result<_>>()?,
        (None, Some(path)) => {
            let mut copy = load_state(path)?;
            if a.noise > 0.0 {
                copy = add_noise(&copy, a.noise)?;
            }
            let input = NogoInput::new(path.display().to_string(), copy.clone(), copy);
            vec![(f64::NAN, optimize(&input, &config)?)]
        }
        (None, None) => return Err(CliError::usage("give --rs or --copy")),
    };
    if a.rs.is_some() || a.csv.is_some() {
        emit(a.csv.as_deref(), &sweep_csv(&certs))?;
    }
    let just_certs: Vec<&NogoCertificate> = certs.iter().map(|(_, c)| c).collect();
    match (a.json.as_deref(), a.rs.is_some()) {
        (Some(p), _) => emit_json(Some(p), &just_certs)?,
        (None, false) => emit_json(None, &just_certs)?,
        (None, true) => {}
    }
    let broken: Vec<String> = certs
        .iter()
        .filter(|(_, c)| !c.holds())
        .map(|(_, c)| format!("{} (gap {:e})", c.input_description, c.gap))
        .collect();
    if broken.is_empty() {
        Ok(())
    } else {
        Err(CliError::violation(format!(
            "gap below {GAP_TOL:e}, apparent distillation: {}",
            broken.join(", ")
        )))
    }
}

fn canon(a: CanonArgs) -> Result<()> {
    let st = load_state(&a.state)?;
    let inputs: [usize; 2] = a
        .inputs
        .as_slice()
        .try_into()
        .map_err(|_| CliError::usage("--inputs takes exactly two modes"))?;
    if inputs[0] == inputs[1] || inputs.contains(&a.output) || a.output >= st.modes() || inputs.iter().any(|&m| m >= st.modes()) {
        return Err(CliError {
            code: 4,
            message: "inputs and output must be three distinct modes of the state".into(),
        });
    }
    let cf = canonicalize_pure_3mode(&st, inputs, a.output)?;
    emit_json(a.out.as_deref(), &CanonicalReport::new(&cf))
}
