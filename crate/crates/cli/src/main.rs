use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpembed::embed_bs::{self, bs_alphabet, oracle_affine, oracle_britton, BsEmbedding, BsParams};
use fpembed::embed_hvm::{count_schema, gen_h, HvmEmbedding, HvmParams};
use fpembed::measure::{self, Family, MeasureConfig};
use fpembed::presentations::{DerivationTrace, GroupPresentation};
use fpembed::schema::{PresentationJson, SMachineJson, TraceJson, WitnessJson};
use fpembed::smachine::{build_machine_for_law, main_property_check, Acceptance, SMachine, SearchLimits};
use fpembed::verbal::{membership_precheck, witness_search, Membership, SearchBounds};
use fpembed::words::{parse_law, Alphabet, LawWord, Word};

#[derive(Parser)]
#[command(name = "fpembed", version, about = "Finite presentations, S-machines and derivation certificates")]
struct Cli {
    /// Seed for every randomized input.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file for the JSON or CSV artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON to stdout instead of a text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Number of hub copies.
    #[arg(long = "N", global = true, default_value_t = 29)]
    big_n: usize,
    /// Permit N < 29; outputs are marked nonstandard-N.
    #[arg(long = "allow-small-N", global = true)]
    allow_small_n: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a presentation.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Build and run S-machines.
    #[command(subcommand)]
    Smachine(SmachineCmd),
    /// Construct a verified derivation trace.
    #[command(subcommand)]
    Derive(DeriveCmd),
    /// Replay a trace file.
    Verify { file: PathBuf },
    /// Sweep a family and report areas.
    Measure(MeasureArgs),
    /// Word-problem and verbal-membership oracles.
    #[command(subcommand)]
    Oracle(OracleCmd),
}

#[derive(Args, Clone)]
struct LawArgs {
    #[arg(long)]
    law: String,
    #[arg(long, default_value_t = 1)]
    m: usize,
}

#[derive(Subcommand)]
enum GenCmd {
    Hvm(LawArgs),
    Bs {
        #[arg(long, default_value_t = 2)]
        k: u32,
    },
}

#[derive(Args, Clone)]
struct MachineSource {
    /// An smachine.v1 file; otherwise the machine of `--law`.
    #[arg(long)]
    machine: Option<PathBuf>,
    #[arg(long, default_value = "x1^3")]
    law: String,
    #[arg(long, default_value_t = 1)]
    m: usize,
}

#[derive(Subcommand)]
enum SmachineCmd {
    Build(LawArgs),
    /// Apply a sequence of rules (`name` or `name^-1`) to a word.
    Run {
        #[command(flatten)]
        src: MachineSource,
        /// Start word; defaults to W0.
        #[arg(long)]
        word: Option<String>,
        #[arg(long)]
        rules: String,
    },
    Accepts {
        #[command(flatten)]
        src: MachineSource,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 8)]
        max_tape: usize,
        #[arg(long, default_value_t = 64)]
        max_steps: usize,
    },
    MainProperty {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        len: usize,
    },
}

#[derive(Subcommand)]
enum DeriveCmd {
    /// Σ(X) → ε over G.
    Sigma {
        #[command(flatten)]
        law: LawArgs,
        /// Components over a1..am, separated by commas.
        #[arg(long = "X", default_value = "")]
        x: String,
    },
    /// v(Y) → ε over H.
    LawInstance {
        #[command(flatten)]
        law: LawArgs,
        /// Components over b1..bm, separated by commas.
        #[arg(long = "Y", default_value = "")]
        y: String,
    },
    Wn {
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long)]
        n: u32,
    },
    BsWord {
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long)]
        word: String,
    },
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    law: Option<String>,
    /// Tape letters for law families; generators for verbal-dehn.
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Record wall-clock milliseconds (makes output irreproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 8)]
    cost_bound: usize,
    #[arg(long, default_value_t = 4)]
    conj_bound: usize,
}

#[derive(Args)]
struct BsWordArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    word: String,
}

#[derive(Subcommand)]
enum OracleCmd {
    BsAffine(BsWordArgs),
    BsBritton(BsWordArgs),
    BsBoth(BsWordArgs),
    VerbalSearch {
        #[arg(long)]
        law: String,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 8)]
        cost_bound: usize,
        #[arg(long, default_value_t = 4)]
        conj_bound: usize,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn invalid(msg: impl ToString) -> Failure {
    Failure { code: 1, msg: msg.to_string() }
}

fn verification(msg: impl ToString) -> Failure {
    Failure { code: 2, msg: msg.to_string() }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    json: bool,
    big_n: usize,
    allow_small_n: bool,
}

impl Ctx {
    fn note(&self) -> Option<String> {
        (self.big_n < 29).then(|| "nonstandard-N".to_string())
    }

    /// Writes the artifact to `--out`, or to stdout under `--json`.
    fn emit(&self, text: &str) -> Outcome {
        if let Some(path) = &self.out {
            write_file(path, text)?;
        } else if self.json {
            println!("{text}");
        }
        Ok(())
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.json || self.out.is_some() {
            println!("{}", line.as_ref());
        }
    }

    fn law_params(&self, a: &LawArgs) -> Result<HvmParams, Failure> {
        let v = parse_law(&a.law).map_err(invalid)?;
        HvmParams::with_small_n(v, a.m, self.big_n, self.allow_small_n).map_err(invalid)
    }

    fn bs_params(&self, k: u32) -> Result<BsParams, Failure> {
        BsParams::with_small_n(k, self.big_n, self.allow_small_n).map_err(invalid)
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = Ctx { seed: cli.seed, out: cli.out, json: cli.json, big_n: cli.big_n, allow_small_n: cli.allow_small_n };
    if ctx.note().is_some() && ctx.allow_small_n {
        eprintln!("note: N = {} is nonstandard-N", ctx.big_n);
    }
    let result = match cli.command {
        Command::Gen(c) => cmd_gen(&ctx, c),
        Command::Smachine(c) => cmd_smachine(&ctx, c),
        Command::Derive(c) => cmd_derive(&ctx, c),
        Command::Verify { file } => cmd_verify(&ctx, &file),
        Command::Measure(a) => cmd_measure(&ctx, a),
        Command::Oracle(c) => cmd_oracle(&ctx, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn presentation_json(ctx: &Ctx, p: &GroupPresentation) -> String {
    let mut j = PresentationJson::from_presentation(p);
    j.note = ctx.note();
    to_json(&j)
}

fn cmd_gen(ctx: &Ctx, c: GenCmd) -> Outcome {
    let h = match &c {
        GenCmd::Hvm(a) => {
            let p = ctx.law_params(a)?;
            let counts = count_schema(&p);
            let h = gen_h(&p);
            if (counts.h_generators, counts.h_total()) != (h.generator_count(), h.relator_count()) {
                return Err(verification("schema counts disagree with the emitted presentation"));
            }
            h
        }
        GenCmd::Bs { k } => embed_bs::gen_h_bs(&ctx.bs_params(*k)?),
    };
    ctx.emit(&presentation_json(ctx, &h))?;
    ctx.say(format!("{} generators, {} relators", h.generator_count(), h.relator_count()));
    for (tag, n) in h.counts_by_tag() {
        ctx.say(format!("  {tag}: {n}"));
    }
    Ok(())
}

fn load_machine(src: &MachineSource) -> Result<SMachine, Failure> {
    match &src.machine {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let j: SMachineJson = serde_json::from_str(&text).map_err(invalid)?;
            j.to_machine().map_err(invalid)
        }
        None => build_machine_for_law(&parse_law(&src.law).map_err(invalid)?, src.m).map_err(invalid),
    }
}

fn cmd_smachine(ctx: &Ctx, c: SmachineCmd) -> Outcome {
    match c {
        SmachineCmd::Build(a) => {
            let m = build_machine_for_law(&parse_law(&a.law).map_err(invalid)?, a.m).map_err(invalid)?;
            ctx.emit(&to_json(&SMachineJson::from_machine(&m)))?;
            ctx.say(format!("{} tapes, {} positive rules", m.tape_count(), m.rules.len()));
            for r in &m.rules {
                let parts: Vec<String> =
                    r.parts.iter().map(|(u, v)| format!("{} -> {}", m.alphabet().format(u), m.alphabet().format(v))).collect();
                ctx.say(format!("  {}: [{}]", r.name, parts.join(", ")));
            }
        }
        SmachineCmd::Run { src, word, rules } => {
            let m = load_machine(&src)?;
            let mut w = match word {
                Some(t) => m.parse_admissible(&t).map_err(invalid)?,
                None => m.w0.clone(),
            };
            ctx.say(m.format(&w));
            for tok in rules.split_whitespace() {
                let (name, inv) = tok.strip_suffix("^-1").map_or((tok, false), |n| (n, true));
                let i = m.rules.iter().position(|r| r.name == name).ok_or_else(|| invalid(format!("unknown rule `{name}`")))?;
                w = m.apply(&w, i, inv).ok_or_else(|| invalid(format!("rule `{tok}` does not apply to {}", m.format(&w))))?;
                ctx.say(format!("  --{tok}--> {}", m.format(&w)));
            }
            if ctx.json {
                ctx.emit(&to_json(&serde_json::json!({ "end": m.format(&w) })))?;
            }
        }
        SmachineCmd::Accepts { src, word, max_tape, max_steps } => {
            let m = load_machine(&src)?;
            let w = m.parse_admissible(&word).map_err(invalid)?;
            match m.accepts(&w, SearchLimits { max_tape_len: max_tape, max_steps }) {
                Acceptance::Accepted(comp) => {
                    ctx.say(format!("accepted: {} steps, area {}", comp.steps.len(), comp.area()));
                    ctx.say(format!("  {}", m.format(&comp.words[0])));
                    for ((rule, inv), w) in comp.steps.iter().zip(&comp.words[1..]) {
                        ctx.say(format!("  --{rule}{}--> {}", if *inv { "^-1" } else { "" }, m.format(w)));
                    }
                    ctx.emit(&to_json(&serde_json::json!({
                        "accepted": true,
                        "area": comp.area(),
                        "words": comp.words.iter().map(|w| m.format(w)).collect::<Vec<_>>(),
                        "rules": comp.steps.iter().map(|(r, i)| if *i { format!("{r}^-1") } else { r.clone() }).collect::<Vec<_>>(),
                    })))?;
                }
                Acceptance::NotFound { explored, closed, length_pruned } => {
                    let status = match (closed, length_pruned) {
                        (true, false) => "closed search".to_string(),
                        (true, true) => format!("closed search within tape length {max_tape}"),
                        _ => "bounded exhaustion".to_string(),
                    };
                    ctx.say(format!("not accepted ({status}, {explored} words explored)"));
                    ctx.emit(&to_json(&serde_json::json!({
                        "accepted": false, "closed": closed, "lengthPruned": length_pruned, "explored": explored,
                    })))?;
                }
            }
        }
        SmachineCmd::MainProperty { law, len } => {
            let v = parse_law(&law.law).map_err(invalid)?;
            let r = main_property_check(&v, law.m, len).map_err(invalid)?;
            ctx.emit(&to_json(&serde_json::json!({
                "checked": r.checked, "accepted": r.accepted, "mismatches": r.mismatches, "closed": r.closed,
            })))?;
            if r.mismatches.is_empty() {
                ctx.say(format!("no mismatches, {} words checked ({} accepted)", r.checked, r.accepted));
            } else {
                for w in &r.mismatches {
                    ctx.say(format!("mismatch: {w}"));
                }
                return Err(verification(format!("{} mismatches in {} words", r.mismatches.len(), r.checked)));
            }
        }
    }
    Ok(())
}

fn components(text: &str, prefix: &str, m: usize, k: usize) -> Result<Vec<Word>, Failure> {
    let al = Alphabet::new((1..=m).map(|j| format!("{prefix}{j}"))).map_err(invalid)?;
    let parts: Vec<&str> = if text.trim().is_empty() { vec![""; k] } else { text.split(',').collect() };
    if parts.len() != k {
        return Err(invalid(format!("expected {k} comma-separated components, got {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            let w = al.parse_letters(p).map_err(invalid)?;
            if !fpembed::words::is_reduced(&w) {
                return Err(invalid(format!("component `{}` is not reduced", p.trim())));
            }
            Ok(Word::from_reduced(w))
        })
        .collect()
}

fn finish_trace(ctx: &Ctx, t: &DerivationTrace) -> Outcome {
    let report = t.verify().map_err(|e| verification(format!("self-verification failed: {e}")))?;
    ctx.emit(&to_json(&TraceJson::from_trace(t)))?;
    ctx.say(format!(
        "area {}, steps {}, maxIntermediateLength {}, start length {}",
        report.area,
        report.step_count,
        report.max_intermediate_length,
        t.start.len()
    ));
    Ok(())
}

fn parse_bs_word(text: &str) -> Result<Vec<fpembed::words::Letter>, Failure> {
    bs_alphabet().parse_letters(text).map_err(invalid)
}

fn cmd_derive(ctx: &Ctx, c: DeriveCmd) -> Outcome {
    let t = match c {
        DeriveCmd::Sigma { law, x } => {
            let p = ctx.law_params(&law)?;
            let xs = components(&x, "a", p.m, p.k())?;
            HvmEmbedding::new(p).derive_sigma_trivial(&xs).map_err(verification)?
        }
        DeriveCmd::LawInstance { law, y } => {
            let p = ctx.law_params(&law)?;
            let xs = components(&y, "b", p.m, p.k())?;
            HvmEmbedding::new(p).derive_law_instance(&xs).map_err(verification)?
        }
        DeriveCmd::Wn { k, n } => BsEmbedding::new(ctx.bs_params(k)?).derive_wn(n).map_err(verification)?,
        DeriveCmd::BsWord { k, word } => {
            let w = parse_bs_word(&word)?;
            let e = BsEmbedding::new(ctx.bs_params(k)?);
            match e.derive_bs_trivial(&w) {
                Ok(t) => t,
                Err(err @ (embed_bs::BsError::NotTrivial | embed_bs::BsError::ForeignLetter)) => return Err(invalid(err)),
                Err(err) => return Err(verification(err)),
            }
        }
    };
    finish_trace(ctx, &t)
}

fn cmd_verify(ctx: &Ctx, file: &Path) -> Outcome {
    let text = fs::read_to_string(file).map_err(|e| invalid(format!("{}: {e}", file.display())))?;
    let j: TraceJson = serde_json::from_str(&text).map_err(invalid)?;
    let t = j.to_trace().map_err(invalid)?;
    let r = t.verify().map_err(verification)?;
    if ctx.json {
        println!(
            "{}",
            to_json(&serde_json::json!({
                "ok": true, "area": r.area, "steps": r.step_count, "maxIntermediateLength": r.max_intermediate_length,
            }))
        );
    } else {
        println!("ok: area {}, steps {}, maxIntermediateLength {}", r.area, r.step_count, r.max_intermediate_length);
    }
    Ok(())
}

fn cmd_measure(ctx: &Ctx, a: MeasureArgs) -> Outcome {
    let family = Family::parse(&a.family).ok_or_else(|| {
        let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        invalid(format!("unknown family `{}` (expected one of {})", a.family, names.join(", ")))
    })?;
    let mut cfg = MeasureConfig::new(family);
    cfg.k = a.k;
    cfg.big_n = ctx.big_n;
    cfg.allow_small_n = ctx.allow_small_n;
    cfg.law = a.law.as_deref().map(parse_law).transpose().map_err(invalid)?;
    cfg.m = a.m;
    cfg.n_min = a.n_min;
    cfg.n_max = a.n_max;
    cfg.step = a.step;
    cfg.samples = a.samples;
    cfg.seed = ctx.seed;
    cfg.timing = a.timing;
    cfg.bounds = SearchBounds { cost: a.cost_bound, conj: a.conj_bound };
    let (csv, summary) = if family == Family::VerbalDehn {
        let (_, rows) = measure::measure_verbal(&cfg).map_err(invalid)?;
        let summary = rows
            .iter()
            .map(|r| format!("n={} fhat={}{}", r.n, r.fhat, if r.exact { "" } else { " (inexact)" }))
            .collect::<Vec<_>>()
            .join("\n");
        (measure::csv_string(&rows).map_err(invalid)?, summary)
    } else {
        let rows = measure::measure_area(&cfg).map_err(|e| match e {
            measure::MeasureError::Verify(_) => verification(e),
            _ => invalid(e),
        })?;
        let fit = measure::fit_rows(family.name(), &rows);
        let summary = if ctx.json {
            to_json(&fit)
        } else {
            format!(
                "{}: slope {:.4}, intercept {:.4}, R^2 {:.4} over n in [{}, {}] ({} points)",
                fit.family,
                fit.slope,
                fit.intercept,
                fit.r2,
                fit.n_lo,
                fit.n_hi,
                fit.points.len()
            )
        };
        (measure::csv_string(&rows).map_err(invalid)?, summary)
    };
    match &ctx.out {
        Some(path) => {
            write_file(path, &csv)?;
            println!("{summary}");
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn word_alphabet(text: &str) -> Result<Alphabet, Failure> {
    let mut names: Vec<String> = Vec::new();
    for tok in text.split_whitespace() {
        let name = tok.split('^').next().unwrap_or_default().to_string();
        if !names.contains(&name) {
            names.push(name);
        }
    }
    Alphabet::new(names).map_err(invalid)
}

fn cmd_oracle(ctx: &Ctx, c: OracleCmd) -> Outcome {
    match c {
        OracleCmd::BsAffine(a) | OracleCmd::BsBritton(a) | OracleCmd::BsBoth(a) if a.k < 2 => {
            Err(invalid(format!("k must be at least 2, got {}", a.k)))
        }
        OracleCmd::BsAffine(a) => {
            let v = oracle_affine(a.k, &parse_bs_word(&a.word)?).map_err(invalid)?;
            println!("{}", verdict(v.is_trivial()));
            Ok(())
        }
        OracleCmd::BsBritton(a) => {
            let v = oracle_britton(a.k, &parse_bs_word(&a.word)?).map_err(invalid)?;
            println!("{}", verdict(v.is_trivial()));
            Ok(())
        }
        OracleCmd::BsBoth(a) => {
            let w = parse_bs_word(&a.word)?;
            let x = oracle_affine(a.k, &w).map_err(invalid)?.is_trivial();
            let y = oracle_britton(a.k, &w).map_err(invalid)?.is_trivial();
            println!("{}/{}", verdict(x), verdict(y));
            if x != y {
                return Err(Failure { code: 3, msg: "oracles disagree".into() });
            }
            Ok(())
        }
        OracleCmd::VerbalSearch { law, word, cost_bound, conj_bound } => {
            let v: LawWord = parse_law(&law).map_err(invalid)?;
            let al = word_alphabet(&word)?;
            let w = al.parse_letters(&word).map_err(invalid)?;
            let w = fpembed::words::free_reduce(&w);
            if membership_precheck(&v, &w, None) == Membership::Out {
                ctx.say("out (exponent sums rule out membership)");
                return Ok(());
            }
            match witness_search(&v, &w, SearchBounds { cost: cost_bound, conj: conj_bound }) {
                Some(wit) => {
                    if !wit.verify(&v, &w) {
                        return Err(verification("witness failed verification"));
                    }
                    ctx.emit(&to_json(&WitnessJson::from_witness(&v, &al, &wit)))?;
                    ctx.say(format!("cost {}, {} factors", wit.cost(), wit.factor_count()));
                    for f in &wit.factors {
                        let xs: Vec<String> = f.values.iter().map(|x| format!("({})", al.format(x))).collect();
                        ctx.say(format!(
                            "  ({}) * v{}^{} * ({})^-1",
                            al.format(&f.conjugator),
                            xs.join(""),
                            f.sign,
                            al.format(&f.conjugator)
                        ));
                    }
                }
                None => ctx.say(format!("unknown within bounds (cost <= {cost_bound}, conjugators <= {conj_bound})")),
            }
            Ok(())
        }
    }
}

fn verdict(trivial: bool) -> &'static str {
    if trivial {
        "trivial"
    } else {
        "nontrivial"
    }
}
