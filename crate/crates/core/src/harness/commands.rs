use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cli::{Cli, Command};
use super::{HarnessError, RunConfig};
use crate::argument::resolve_argument;
use crate::executor::execute;
use crate::kb::KnowledgeBase;
use crate::program::Program;
use crate::pruning::{search_space_size, PoolKind};
use crate::sketch::Parser;
use crate::train::{
    build_vocab, evaluate, finetune, generate_synthetic_domains, pretrain, read_jsonl, run_ablations, run_transfer, target_texts,
    to_jsonl, AblationReport, DatasetExample, EvalReport, FinetuneReport, PretrainReport, QuestionType, SyntheticSuite, TrainConfig,
    TransferData,
};

const VOCAB_SEED: u64 = 0x7645;

struct Ctx<'a> {
    cli: &'a Cli,
    config: RunConfig,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            eprintln!("[kbpt {}] {}", self.cli.name(), msg.as_ref());
        }
    }

    /// Creates the run directory and echoes the effective config into it.
    fn run_dir(&self, seed: u64) -> Result<PathBuf, HarnessError> {
        let dir = match &self.cli.run_dir {
            Some(d) => d.clone(),
            None => {
                let stamp = chrono::DateTime::<chrono::Utc>::from(std::time::SystemTime::now()).format("%Y%m%d-%H%M%S%.3f");
                self.cli.run_root.join(format!("{stamp}-seed{seed}-{}", self.cli.name()))
            }
        };
        std::fs::create_dir_all(&dir).map_err(HarnessError::io(&dir))?;
        write(&dir.join("config.toml"), self.config.to_toml())?;
        self.log(format!("run directory {}", dir.display()));
        Ok(dir)
    }

    fn input(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf, HarnessError> {
        let p = path.clone().ok_or_else(|| HarnessError::Usage(format!("--{what} is required (flag or [inputs] in the config)")))?;
        if !p.exists() {
            return Err(HarnessError::Missing(p));
        }
        Ok(p)
    }

    fn kb(&self) -> Result<KnowledgeBase, HarnessError> {
        let path = self.input("kb", &self.config.inputs.kb)?;
        let kb = KnowledgeBase::load(&path)?;
        self.log(format!(
            "{}: {} entities, {} concepts, {} relations",
            path.display(),
            kb.num_entities(),
            kb.num_concepts(),
            kb.num_relations()
        ));
        Ok(kb)
    }

    fn dataset(&self) -> Result<Vec<DatasetExample>, HarnessError> {
        let path = self.input("dataset", &self.config.inputs.dataset)?;
        let data = read_jsonl(&path)?;
        self.log(format!("{}: {} examples", path.display(), data.len()));
        Ok(data)
    }

    fn checkpoint(&self) -> Result<Option<Parser>, HarnessError> {
        match &self.config.inputs.checkpoint {
            None => Ok(None),
            Some(p) if !p.exists() => Err(HarnessError::Missing(p.clone())),
            Some(p) => Ok(Some(Parser::load(p)?)),
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(HarnessError::io(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write(path, text)
}

pub fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    let ctx = Ctx { cli, config: cli.effective_config()? };
    match &cli.command {
        Command::Gen { .. } => cmd_gen(&ctx),
        Command::Pretrain { .. } => cmd_pretrain(&ctx),
        Command::Finetune { .. } => cmd_finetune(&ctx),
        Command::Eval { .. } => cmd_eval(&ctx),
        Command::Exec { program, trace, .. } => cmd_exec(&ctx, program, *trace),
        Command::PruneStats { .. } => cmd_prune_stats(&ctx),
        Command::Run { ablations, .. } => cmd_run(&ctx, *ablations),
    }
}

fn write_suite(dir: &Path, suite: &SyntheticSuite) -> Result<(), HarnessError> {
    write(&dir.join("source_kb.json"), suite.source_kb.to_json_string())?;
    write(&dir.join("target_kb.json"), suite.target_kb.to_json_string())?;
    write(&dir.join("source.jsonl"), to_jsonl(&suite.source))?;
    write(&dir.join("target_train.jsonl"), to_jsonl(&suite.target_train))?;
    write(&dir.join("target_dev.jsonl"), to_jsonl(&suite.target_dev))?;
    let gold: Vec<DatasetExample> = suite
        .target_train
        .iter()
        .chain(&suite.target_dev)
        .zip(&suite.target_gold)
        .map(|(ex, p)| DatasetExample::with_program(ex.question.clone(), p, ex.answers.clone()))
        .collect();
    write(&dir.join("target_gold.jsonl"), to_jsonl(&gold))
}

fn type_counts(types: &[QuestionType]) -> String {
    QuestionType::ALL.iter().map(|t| format!("{} {}", t.name(), types.iter().filter(|x| *x == t).count())).collect::<Vec<_>>().join(", ")
}

fn cmd_gen(ctx: &Ctx) -> Result<(), HarnessError> {
    let suite = generate_synthetic_domains(&ctx.config.synth)?;
    let dir = ctx.run_dir(ctx.config.synth.seed)?;
    write_suite(&dir, &suite)?;
    ctx.log(format!("source: {}", type_counts(&suite.source_types)));
    ctx.log(format!("target: {}", type_counts(&suite.target_types)));
    println!("{}", dir.display());
    Ok(())
}

fn loss_csv(report: &PretrainReport) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", i + 1);
    }
    s
}

fn reward_csv(report: &FinetuneReport) -> String {
    let mut s = String::from("epoch,mean_reward,skipped,updates,executions\n");
    for (i, e) in report.epochs.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", i + 1, e.mean_reward, e.skipped, e.updates, e.executions);
    }
    s
}

fn topk_csv(report: &EvalReport) -> String {
    let mut s = String::from("k,best_f1\n");
    for (k, v) in &report.best_f1_at_k {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn cmd_pretrain(ctx: &Ctx) -> Result<(), HarnessError> {
    let cfg = &ctx.config.train;
    let kb = ctx.kb()?;
    let data = ctx.dataset()?;
    let mut parser = Parser::new(cfg.model, build_vocab(&data, &kb), cfg.seed);
    let dir = ctx.run_dir(cfg.seed)?;
    let report = pretrain(&mut parser, &data, &kb, cfg)?;
    if let Some(last) = report.epoch_losses.last() {
        ctx.log(format!("{} epochs, final loss {last:.4}", report.epoch_losses.len()));
    }
    parser.save(&dir.join("checkpoint"))?;
    write(&dir.join("pretrain_loss.csv"), loss_csv(&report))?;
    write_json(&dir.join("metrics.json"), &report)?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_finetune(ctx: &Ctx) -> Result<(), HarnessError> {
    let cfg = &ctx.config.train;
    let kb = ctx.kb()?;
    let data = ctx.dataset()?;
    let mut parser = match ctx.checkpoint()? {
        Some(p) => p,
        None => {
            ctx.log("no checkpoint given, starting from random initialization");
            Parser::new(cfg.model, build_vocab(&[], &kb), cfg.seed)
        }
    };
    let texts = target_texts(&data, &kb);
    parser.extend_vocab(texts.iter().map(String::as_str), cfg.seed ^ VOCAB_SEED);
    let dir = ctx.run_dir(cfg.seed)?;
    let report = finetune(&mut parser, &data, &kb, cfg)?;
    for (i, e) in report.epochs.iter().enumerate() {
        ctx.log(format!("epoch {}: mean reward {:.4}, skipped {}", i + 1, e.mean_reward, e.skipped));
    }
    parser.save(&dir.join("checkpoint"))?;
    write(&dir.join("finetune_reward.csv"), reward_csv(&report))?;
    write_json(&dir.join("metrics.json"), &report)?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_eval(ctx: &Ctx) -> Result<(), HarnessError> {
    let cfg = &ctx.config.train;
    let kb = ctx.kb()?;
    let data = ctx.dataset()?;
    if data.is_empty() {
        return Err(HarnessError::Data("dataset is empty, nothing to evaluate".into()));
    }
    let mut parser = ctx.checkpoint()?.ok_or_else(|| HarnessError::Usage("eval needs --checkpoint".into()))?;
    let texts = target_texts(&data, &kb);
    parser.extend_vocab(texts.iter().map(String::as_str), cfg.seed ^ VOCAB_SEED);
    let report = evaluate(&parser, &data, &kb, cfg)?;
    let dir = ctx.run_dir(cfg.seed)?;
    write_json(&dir.join("metrics.json"), &report)?;
    write(&dir.join("topk.csv"), topk_csv(&report))?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_exec(ctx: &Ctx, program: &str, trace: bool) -> Result<(), HarnessError> {
    let kb = ctx.kb()?;
    let path = Path::new(program);
    let text = if path.is_file() { std::fs::read_to_string(path).map_err(HarnessError::io(path))? } else { program.to_string() };
    let program: Program = text.trim().parse()?;
    let result = execute(&program, &kb)?;
    if trace {
        for (i, s) in result.trace.iter().enumerate() {
            eprintln!("{i:>3} {}({}) [{}] -> {}", s.function.name(), s.argument, s.inputs.join(" | "), s.output);
        }
    }
    for answer in &result.answers {
        println!("{answer}");
    }
    Ok(())
}

/// Search-space sizes of one gold program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneRow {
    pub index: usize,
    pub question_type: Option<QuestionType>,
    pub unpruned: f64,
    pub pruned: f64,
    pub unpruned_without_entities: f64,
    pub pruned_without_entities: f64,
}

impl PruneRow {
    pub fn ratio(&self) -> f64 {
        self.pruned / self.unpruned
    }
}

/// One row per example that carries a gold program.
pub fn prune_rows(kb: &KnowledgeBase, data: &[DatasetExample]) -> Result<Vec<PruneRow>, HarnessError> {
    let mut rows = Vec::new();
    for (index, ex) in data.iter().enumerate() {
        let Some(program) = ex.program() else { continue };
        let sketch = program.sketch();
        let trace = program
            .steps
            .iter()
            .filter(|s| PoolKind::of(s.function).is_some())
            .map(|s| {
                resolve_argument(kb, s.function, &s.argument)
                    .ok_or_else(|| HarnessError::Program(format!("example {index}: '{}' is not in the KB", s.argument)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let full = search_space_size(&sketch, kb, &trace, false)?;
        let pruned = search_space_size(&sketch, kb, &trace, true)?;
        rows.push(PruneRow {
            index,
            question_type: QuestionType::of_sketch(sketch.functions()),
            unpruned: full.total,
            pruned: pruned.total,
            unpruned_without_entities: full.without_entities,
            pruned_without_entities: pruned.without_entities,
        });
    }
    Ok(rows)
}

fn cmd_prune_stats(ctx: &Ctx) -> Result<(), HarnessError> {
    let kb = ctx.kb()?;
    let data = ctx.dataset()?;
    let rows = prune_rows(&kb, &data)?;
    if rows.is_empty() {
        return Err(HarnessError::Data("no example carries a gold program".into()));
    }
    let mut csv = String::from("index,type,unpruned,pruned,ratio,unpruned_without_entities,pruned_without_entities\n");
    for r in &rows {
        let t = r.question_type.map_or("other", QuestionType::name);
        let _ = writeln!(
            csv,
            "{},{t},{},{},{},{},{}",
            r.index,
            r.unpruned,
            r.pruned,
            r.ratio(),
            r.unpruned_without_entities,
            r.pruned_without_entities
        );
    }
    let mut summary = String::from("type,questions,mean_unpruned,mean_pruned,mean_ratio\n");
    let groups = QuestionType::ALL.iter().map(|t| (t.name(), Some(*t))).chain([("all", None)]);
    for (name, t) in groups {
        let sel: Vec<&PruneRow> = rows.iter().filter(|r| t.is_none() || r.question_type == t).collect();
        if sel.is_empty() {
            continue;
        }
        let n = sel.len() as f64;
        let mean = |f: fn(&PruneRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
        let _ = writeln!(summary, "{name},{},{},{},{}", sel.len(), mean(|r| r.unpruned), mean(|r| r.pruned), mean(PruneRow::ratio));
    }
    let dir = ctx.run_dir(ctx.config.train.seed)?;
    write(&dir.join("prune_stats.csv"), &csv)?;
    write(&dir.join("prune_summary.csv"), &summary)?;
    eprint!("{summary}");
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct AblationRow<'a> {
    variant: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn ablation_csv(r: &AblationReport) -> String {
    let mut s = String::from("variant,f1,hits_at_1");
    for (k, _) in &r.full.best_f1_at_k {
        let _ = write!(s, ",best_f1_at_{k}");
    }
    s.push('\n');
    for (name, e) in ablation_variants(r) {
        let _ = write!(s, "{name},{},{}", e.f1, e.hits_at_1);
        for (_, v) in &e.best_f1_at_k {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn ablation_variants(r: &AblationReport) -> [(&'static str, &EvalReport); 5] {
    [
        ("full", &r.full),
        ("no-finetune", &r.no_finetune),
        ("no-pretrain", &r.no_pretrain),
        ("no-ontology", &r.no_ontology),
        ("reinforce", &r.reinforce),
    ]
}

fn cmd_run(ctx: &Ctx, ablations: bool) -> Result<(), HarnessError> {
    let cfg: &TrainConfig = &ctx.config.train;
    let suite = generate_synthetic_domains(&ctx.config.synth)?;
    let dir = ctx.run_dir(cfg.seed)?;
    write_suite(&dir, &suite)?;
    let data = TransferData {
        source: &suite.source,
        source_kb: &suite.source_kb,
        target: &suite.target_train,
        target_kb: &suite.target_kb,
        dev: &suite.target_dev,
    };
    ctx.log(format!("transfer: {} source, {} target, {} dev examples", data.source.len(), data.target.len(), data.dev.len()));
    let (parser, outcome) = run_transfer(data, cfg, true)?;
    parser.save(&dir.join("checkpoint"))?;
    if let Some(p) = &outcome.pretrain {
        write(&dir.join("pretrain_loss.csv"), loss_csv(p))?;
    }
    if let Some(f) = &outcome.finetune {
        write(&dir.join("finetune_reward.csv"), reward_csv(f))?;
    }
    write(&dir.join("topk.csv"), topk_csv(&outcome.dev))?;
    write_json(&dir.join("metrics.json"), &outcome)?;
    if let Some(b) = &outcome.before_finetune {
        ctx.log(format!("dev F1 before finetuning {:.2}", 100.0 * b.f1));
    }
    print!("{}", outcome.dev.table());
    if ablations {
        ctx.log("running ablations");
        let report = run_ablations(data, cfg)?;
        let rows: Vec<AblationRow> = ablation_variants(&report).into_iter().map(|(variant, report)| AblationRow { variant, report }).collect();
        write_json(&dir.join("ablations.json"), &rows)?;
        let csv = ablation_csv(&report);
        write(&dir.join("ablations.csv"), &csv)?;
        print!("{csv}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::main_with_args;

    fn fixture_file(dir: &Path) -> PathBuf {
        let p = dir.join("kb.json");
        std::fs::write(&p, crate::kb::fixture::fixture().to_json_string()).unwrap();
        p
    }

    #[test]
    fn missing_kb_file_exit_code() {
        let code = main_with_args(["kbpt", "-q", "exec", "--kb", "/nonexistent/kb.json", "--program", "Find(x)"]);
        assert_eq!(code, 4);
    }

    #[test]
    fn bad_program_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let kb = fixture_file(dir.path());
        let code = main_with_args(["kbpt", "-q", "exec", "--kb", kb.to_str().unwrap(), "--program", "Find(FC Barcelona);And()"]);
        assert_eq!(code, 7);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["kbpt", "exec", "--bogus"]), 2);
    }

    #[test]
    fn prune_rows_cover_programs_only() {
        let kb = crate::kb::fixture::fixture();
        let p: Program = "Find(FC Barcelona);Relate(arena stadium forward);FilterConcept(sports facility)".parse().unwrap();
        let data = vec![DatasetExample::with_program("q", &p, None), DatasetExample::with_answers("q2", vec!["x".into()])];
        let rows = prune_rows(&kb, &data).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].pruned <= rows[0].unpruned);
        assert_eq!(rows[0].question_type, Some(QuestionType::Simple));
    }
}
