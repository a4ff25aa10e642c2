use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::Arc;

use anyhow::Context;
use bsa_core::{ActionClass, SurgeryType};
use bsa_planning::synthetic::synthetic_contexts;
use bsa_planning::{
    load_contexts, make_samples, mock_by_name, oracle_from_samples, run_planning, surgeon_match_metrics, AccuracyTable,
    AgentClient, ClientConfig, DirectoryFrames, FrameSource, KnowledgeBase, MockServer, PredictionLog, SyntheticFrames, WINDOW,
};
use serde::Deserialize;
use serde_json::json;

use crate::config::{pick, FileConfig};
use crate::{echo_config, require_file, PlanRunArgs, PlanScoreArgs, UsageError, ValidationFailed};

pub fn run(args: &PlanRunArgs, file: &FileConfig, human: bool) -> anyhow::Result<()> {
    let p = &file.planning;
    let seed = pick(args.seed, file.seed, 0);
    let parallelism = pick(args.parallelism, p.parallelism, 4);
    let model = pick(args.model.clone(), p.model.clone(), "mock-model".to_string());
    let endpoint = args.endpoint.clone().or(p.endpoint.clone());
    let api_key = args.api_key.clone().or(p.api_key.clone());
    let kb_path = args.knowledge_base.clone().or(p.knowledge_base.clone());
    let frames_dir = args.frames_dir.clone().or(p.frames_dir.clone());

    if args.mock.is_none() && endpoint.is_none() {
        return Err(UsageError("either --mock or an endpoint (--endpoint, BSA_ENDPOINT or config) is required".into()).into());
    }
    if args.contexts.is_none() && args.synthetic.is_none() {
        return Err(UsageError("either --contexts or --synthetic is required".into()).into());
    }
    if let Some(c) = &args.contexts {
        require_file(c, "contexts file")?;
    }
    if let Some(k) = &kb_path {
        require_file(k, "knowledge base")?;
    }
    if let Some(d) = &frames_dir {
        if !d.is_dir() {
            return Err(UsageError(format!("frames directory `{}` does not exist", d.display())).into());
        }
    }

    let contexts = match &args.contexts {
        Some(path) => load_contexts(path).map_err(|e| ValidationFailed(format!("contexts unreadable: {e}")))?,
        None => synthetic_contexts(args.synthetic.unwrap_or(0), args.clips, SurgeryType::Cholecystectomy, seed),
    };
    let samples: Vec<_> = contexts.iter().flat_map(|c| make_samples(c, WINDOW)).collect();
    let kb = match &kb_path {
        Some(path) => KnowledgeBase::load(path)?,
        None => KnowledgeBase::builtin(),
    };
    let frames: Box<dyn FrameSource> = match &frames_dir {
        Some(root) => Box::new(DirectoryFrames { root: root.clone() }),
        None => Box::new(SyntheticFrames),
    };

    let runtime = tokio::runtime::Runtime::new()?;
    let log = runtime.block_on(async {
        let server = match &args.mock {
            Some(name) => {
                let responder =
                    mock_by_name(name, Arc::new(oracle_from_samples(&samples)), seed).map_err(|e| UsageError(e.to_string()))?;
                Some(MockServer::start(responder).await?)
            }
            None => None,
        };
        let mut cfg = ClientConfig::new(
            server.as_ref().map(MockServer::endpoint).or(endpoint.clone()).unwrap_or_default(),
            model.clone(),
        );
        cfg.api_key = api_key.clone();
        cfg.parallelism = parallelism;
        if let Some(t) = p.timeout_s {
            cfg.timeout_s = t;
        }
        echo_config(
            "plan run",
            json!({"contexts": args.contexts, "synthetic": args.synthetic, "clips": args.clips, "samples": samples.len(),
                   "mock": args.mock, "client": cfg, "api_key_set": cfg.api_key.is_some(),
                   "knowledge_base": kb_path, "frames_dir": frames_dir, "seed": seed, "out": args.out}),
        );
        let client = AgentClient::new(cfg)?;
        let mut log = run_planning(&client, &samples, &kb, frames.as_ref(), seed).await?;
        if let Some(name) = &args.mock {
            // The mock port changes per run; keep the log reproducible.
            log.metadata.endpoint = format!("mock:{name}");
        }
        if let Some(s) = server {
            s.stop().await;
        }
        anyhow::Ok(log)
    })?;

    log.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let failed = log.entries().filter(|e| e.response.is_none()).count();
    let retried = log.entries().filter(|e| e.parse_retries > 0).count();
    if human {
        println!("{} samples, {} failed, {} needed a retry; log at {}", log.len(), failed, retried, args.out.display());
    } else {
        println!(
            "{}",
            json!({"samples": log.len(), "failed": failed, "retried": retried, "log": args.out})
        );
    }
    Ok(())
}

#[derive(Deserialize)]
struct SurgeonLine {
    context_id: String,
    t: usize,
    choices: Vec<ActionClass>,
}

fn read_surgeon(path: &std::path::Path) -> anyhow::Result<BTreeMap<(String, usize), Vec<ActionClass>>> {
    let mut out = BTreeMap::new();
    for (i, line) in std::io::BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SurgeonLine =
            serde_json::from_str(&line).map_err(|e| ValidationFailed(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.insert((s.context_id, s.t), s.choices);
    }
    Ok(out)
}

pub fn score(args: &PlanScoreArgs, human: bool) -> anyhow::Result<()> {
    require_file(&args.log, "prediction log")?;
    if let Some(s) = &args.surgeon {
        require_file(s, "surgeon choices")?;
    }
    let log = PredictionLog::load(&args.log).map_err(|e| ValidationFailed(format!("log unreadable: {e}")))?;
    echo_config(
        "plan score",
        json!({"log": args.log, "out": args.out, "surgeon": args.surgeon, "run": log.metadata}),
    );
    let table = AccuracyTable::compute(&log)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    match &args.out {
        Some(p) => std::fs::write(p, &csv)?,
        None if !human => print!("{}", String::from_utf8(csv)?),
        None => {}
    }
    if human {
        println!("{} samples over {} contexts", table.samples, table.contexts);
        println!("{:<12}{:>8}{:>8}{:>8}", "", "top-1", "top-2", "top-3");
        for (name, v) in table.rows() {
            println!("{:<12}{:>7.2}%{:>7.2}%{:>7.2}%", name, 100.0 * v[0], 100.0 * v[1], 100.0 * v[2]);
        }
    }
    if let Some(path) = &args.surgeon {
        let m = surgeon_match_metrics(&log, &read_surgeon(path)?)?;
        if human {
            println!(
                "surgeon match: top-1 {:.4}, top-1 any {:.4}, top-3 inclusion {:.4}",
                m.top1_match, m.top1_any_match, m.top3_inclusion
            );
        } else {
            eprintln!("{}", serde_json::to_string(&m)?);
        }
    }
    Ok(())
}
