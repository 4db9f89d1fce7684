//! Command-line front end: argument types, dispatch and reports.

pub mod report;
pub mod session;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dpncaret::caret::{closure, parse_surface, AtomTable};
use dpncaret::dpn::{flowgraph_to_dpn, parse_flowgraph, parse_model, print_model};
use dpncaret::oracle::ExploreBounds;
use dpncaret::product::{build_product, print_product};
use dpncaret::reductions::{guesses, ldpn_to_dpn, regval_encode};
use serde::Serialize;

use report::{AtomReport, CheckReport, FormulaReport, LockGuess, OracleReport, SizesReport};
use session::{run_check, run_oracle, Model};

#[derive(Parser, Debug)]
#[command(
    name = "dpncaret",
    version,
    about = "CARET model checking for dynamic pushdown networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether the initial configuration satisfies the formulas.
    Check(RunArgs),
    /// Bounded brute-force answer (sat, unsat or unknown) for the same question.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// e.g. `steps=2000,stack=6,instances=8,interleavings=100000,lassos=200000`
        #[arg(long, value_parser = ExploreBounds::parse)]
        bounds: Option<ExploreBounds>,
    },
    /// Print closure, atoms or product sizes.
    Inspect(InspectArgs),
    /// Print a derived model.
    Translate {
        #[command(subcommand)]
        what: Translate,
    },
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub model: PathBuf,
    pub formulas: PathBuf,
    /// Initial global configuration, e.g. `P1: p1 m0, P2: p2 m'0`.
    #[arg(long)]
    pub init: String,
    /// Extend halting runs by stuttering at a bottom marker.
    #[arg(long)]
    pub stutter: bool,
    /// Regular valuation file.
    #[arg(long)]
    pub valuation: Option<PathBuf>,
    /// Add wall-clock timings to the report.
    #[arg(long)]
    pub timings: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// List the closure of a formula.
    #[arg(long, value_name = "FORMULA")]
    pub closure: Option<String>,
    /// List closure and atoms of a formula.
    #[arg(long, value_name = "FORMULA", conflicts_with = "closure")]
    pub atoms: Option<String>,
    #[arg(requires = "formulas")]
    pub model: Option<PathBuf>,
    pub formulas: Option<PathBuf>,
    #[arg(long)]
    pub stutter: bool,
    #[arg(long)]
    pub valuation: Option<PathBuf>,
    /// Print the product itself instead of its sizes.
    #[arg(long)]
    pub emit_product: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Subcommand, Debug)]
pub enum Translate {
    /// Encode a regular valuation into the model.
    Regval {
        model: PathBuf,
        #[arg(long)]
        valuation: PathBuf,
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode lock behaviour for one guess of locks held forever.
    Locks {
        model: PathBuf,
        #[arg(long)]
        init: String,
        /// Index into the enumerated guesses.
        #[arg(long, default_value_t = 0)]
        guess: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a flow-graph program into a model.
    Flowgraph {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Exit code and report text of one command.
pub struct Outcome {
    pub code: i32,
    pub text: String,
    pub out: Option<PathBuf>,
}

fn json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Check(a) => check_cmd(a),
        Command::Oracle { run, bounds } => oracle_cmd(run, bounds.unwrap_or_default()),
        Command::Inspect(a) => inspect_cmd(a),
        Command::Translate { what } => translate_cmd(what),
    }
}

fn load(
    a: &RunArgs,
) -> Result<(
    Model,
    Vec<dpncaret::caret::Formula>,
    dpncaret::dpn::GlobalConfig,
)> {
    let m = Model::load(&a.model, a.valuation.as_deref())?;
    let fs = m.formulas(&a.formulas)?;
    let g = m.init(&a.init)?;
    Ok((m, fs, g))
}

fn check_cmd(a: RunArgs) -> Result<Outcome> {
    let t0 = Instant::now();
    let (m, fs, g) = load(&a)?;
    let parse = ms(t0);
    let t1 = Instant::now();
    let r = run_check(&m, &fs, &g, a.stutter)?;
    let check = ms(t1);
    let mut rep = CheckReport::new(&r.verdict);
    rep.lock_guess = r.guess.as_ref().map(|(q, n)| LockGuess::new(&m.ld, q, *n));
    if a.timings {
        rep.timings = Some(BTreeMap::from([("parse_ms", parse), ("check_ms", check)]));
    }
    let text = match a.output.format {
        Format::Json => json(&rep),
        Format::Text => rep.text(),
    };
    Ok(Outcome {
        code: if r.verdict.sat { 0 } else { 1 },
        text,
        out: a.output.out,
    })
}

fn oracle_cmd(a: RunArgs, bounds: ExploreBounds) -> Result<Outcome> {
    let t0 = Instant::now();
    let (m, fs, g) = load(&a)?;
    let parse = ms(t0);
    let t1 = Instant::now();
    let (o, explored) = run_oracle(&m, &fs, &g, a.stutter, &bounds);
    let oracle = ms(t1);
    let mut rep = OracleReport::new(&o, &explored);
    if a.timings {
        rep.timings = Some(BTreeMap::from([("parse_ms", parse), ("oracle_ms", oracle)]));
    }
    let code = match o.answer.definite() {
        Some(true) => 0,
        Some(false) => 1,
        None => 3,
    };
    let text = match a.output.format {
        Format::Json => json(&rep),
        Format::Text => rep.text(),
    };
    Ok(Outcome {
        code,
        text,
        out: a.output.out,
    })
}

fn formula_report(text: &str, with_atoms: bool) -> Result<FormulaReport> {
    let f = parse_surface(text)?;
    let core = f.desugar();
    let cl = closure(&core);
    let atoms = with_atoms.then(|| {
        let table = AtomTable::new(&core);
        table
            .atoms()
            .iter()
            .enumerate()
            .map(|(i, a)| AtomReport {
                index: i,
                tag: a.tag().to_string(),
                members: a.members().map(|k| cl.get(k).to_string()).collect(),
            })
            .collect()
    });
    Ok(FormulaReport {
        formula: f.to_string(),
        core: core.to_string(),
        closure: cl.items().iter().map(|g| g.to_string()).collect(),
        atoms,
    })
}

fn inspect_cmd(a: InspectArgs) -> Result<Outcome> {
    let text = if let Some(f) = a.closure.as_deref().or(a.atoms.as_deref()) {
        let r = formula_report(f, a.atoms.is_some())?;
        match a.output.format {
            Format::Json => json(&r),
            Format::Text => r.text(),
        }
    } else {
        let (Some(model), Some(formulas)) = (&a.model, &a.formulas) else {
            bail!("inspect needs --closure, --atoms, or a model and a formula file");
        };
        let m = Model::load(model, a.valuation.as_deref())?;
        let fs: Vec<_> = m.formulas(formulas)?.iter().map(|f| f.desugar()).collect();
        let s = m.dpn().with_stutter();
        let (base, nu) = match (&m.nu, a.stutter) {
            (Some(nu), true) => (&s.dpn, Some(nu.stuttered(&s))),
            (Some(nu), false) => (m.dpn(), Some(nu.clone())),
            (None, true) => (&s.dpn, None),
            (None, false) => (m.dpn(), None),
        };
        let dpn = match nu {
            Some(nu) => regval_encode(base, &nu).dpn,
            None => base.clone(),
        };
        let g = build_product(&dpn, &fs)?;
        if a.emit_product {
            print_product(&dpn, &g)
        } else {
            let sizes: Vec<_> = g.members.iter().map(|m| m.sizes(&dpn)).collect();
            match a.output.format {
                Format::Json => json(&SizesReport { sizes: &sizes }),
                Format::Text => sizes
                    .iter()
                    .map(|s| {
                        format!(
                            "{}: {} atoms, {} controls (+{} popped), {} symbols, {} rules, {} acceptance sets\n",
                            s.process, s.atoms, s.controls, s.popped_controls, s.symbols, s.rules, s.acceptance_sets
                        )
                    })
                    .collect(),
            }
        }
    };
    Ok(Outcome {
        code: 0,
        text,
        out: a.output.out,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn translate_cmd(t: Translate) -> Result<Outcome> {
    let (text, out) = match t {
        Translate::Regval {
            model,
            valuation,
            init,
            out,
        } => {
            let m = Model::load(&model, Some(&valuation))?;
            let enc = regval_encode(m.dpn(), m.nu.as_ref().unwrap());
            let mut text = print_model(&enc.dpn, &[], &[]);
            if let Some(init) = init {
                let g = enc.encode_global(&m.init(&init)?);
                let shown: Vec<String> = g.iter().map(|c| enc.dpn.show(c)).collect();
                text.push_str(&format!("# init: {}\n", shown.join(", ")));
            }
            (text, out)
        }
        Translate::Locks {
            model,
            init,
            guess,
            out,
        } => {
            let m = Model::load(&model, None)?;
            let g = m.init(&init)?;
            let all = guesses(&m.ld, g.len());
            let Some(q) = all.get(guess) else {
                bail!("guess {guess} out of range: {} guesses", all.len());
            };
            let enc = ldpn_to_dpn(&m.ld, q, &g);
            let tokens: Vec<&str> = q.tokens.iter().map(|&l| m.ld.locks[l].as_str()).collect();
            let mut text = format!(
                "# guess {guess} of {}: held forever [{}] owners {:?}\n",
                all.len(),
                tokens.join(" "),
                q.owners
            );
            text.push_str(&format!(
                "# conjoin each formula with: Gg Fg {}\n",
                enc.ok_prop
            ));
            text.push_str(&print_model(&enc.dpn, &[], &[]));
            let shown: Vec<String> = enc.roots().iter().map(|c| enc.dpn.show(c)).collect();
            text.push_str(&format!("# init: {}\n", shown.join(", ")));
            (text, out)
        }
        Translate::Flowgraph { input, out } => {
            let sys = parse_flowgraph(&read(&input)?)
                .with_context(|| format!("in {}", input.display()))?;
            let dpn = flowgraph_to_dpn(&sys)?;
            let text = print_model(&dpn, &[], &[]);
            // what we print must read back as the same model
            debug_assert_eq!(parse_model(&text).map(|m| m.dpn).ok().as_ref(), Some(&dpn));
            (text, out)
        }
    };
    Ok(Outcome { code: 0, text, out })
}
