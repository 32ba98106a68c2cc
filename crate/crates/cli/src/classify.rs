use std::collections::BTreeMap;

use clap::Args;
use serde::Serialize;

use singular_cotangent::normal_forms::{
    classify_point, enumerate_branches, leaf_type_valid, model_functions, LeafType, LocalModel, ModelFactor,
    WilliamsonType, DEFAULT_TRIALS,
};
use singular_cotangent::parallel::par_map;
use singular_cotangent::sampling::stream_seed;

use crate::report::cols;
use crate::{verdict, CliError, CliResult, GlobalArgs, Output, MODEL_HELP};

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[arg(long, help = MODEL_HELP)]
    pub model: String,

    /// Independently seeded classifications of the origin
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Serialize)]
struct Trial {
    seed: u64,
    rank: usize,
    williamson: WilliamsonType,
    agreeing: usize,
}

#[derive(Debug, Serialize)]
struct ClassifyReport {
    model: String,
    n: usize,
    seed: u64,
    expected: WilliamsonType,
    rank: usize,
    trials: usize,
    matching_trials: usize,
    observed: BTreeMap<String, usize>,
    branch_count: usize,
    expected_branch_count: usize,
    branches: Vec<String>,
    leaf_type: LeafType,
    leaf_type_total: usize,
    leaf_type_valid: bool,
    passed: bool,
}

pub fn run(args: &ClassifyArgs, global: &GlobalArgs, out: &Output) -> CliResult<bool> {
    let model: LocalModel = args.model.parse()?;
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let functions = model_functions(&model);
    let origin = vec![0.0; 2 * model.n()];
    let seeds: Vec<u64> = (0..args.trials as u64).map(|k| stream_seed(global.seed, k)).collect();
    let results = par_map(&seeds, |&s| classify_point(&functions, &origin, DEFAULT_TRIALS, s));
    let mut trials = Vec::with_capacity(seeds.len());
    for (s, r) in seeds.iter().zip(results) {
        let c = r?;
        trials.push(Trial {
            seed: *s,
            rank: c.rank,
            williamson: c.williamson,
            agreeing: c.agreeing,
        });
    }

    let expected = model.williamson();
    let rank = model.count(ModelFactor::Regular);
    let matching = trials.iter().filter(|t| t.williamson == expected && t.rank == rank).count();
    let mut observed = BTreeMap::new();
    for t in &trials {
        *observed.entry(t.williamson.to_string()).or_insert(0) += 1;
    }
    let branches: Vec<String> = enumerate_branches(&model).iter().map(|l| l.to_string()).collect();
    let expected_branch_count = 1usize << (expected.k_h + expected.k_f);
    let leaf_type = model.origin_leaf_type();
    let valid = leaf_type_valid(&leaf_type, model.n());
    let passed = matching == trials.len() && branches.len() == expected_branch_count && valid;

    out.line(format!("model {model} (n = {})", model.n()));
    out.line(format!(
        "  williamson type at origin   {}   ({matching}/{} trials)",
        expected,
        trials.len()
    ));
    out.line(format!("  rank at origin              {rank}"));
    out.line(format!("  branches                    {} [{}]", branches.len(), branches.join(", ")));
    out.line(format!(
        "  leaf type (k_e,k_h,k_f,c,o) ({},{},{},{},{})  sum {} = n: {}",
        leaf_type.k_e,
        leaf_type.k_h,
        leaf_type.k_f,
        leaf_type.c,
        leaf_type.o,
        leaf_type.total(),
        valid
    ));
    out.line(verdict(passed));
    if matching != trials.len() {
        eprintln!("classification disagrees with {expected} in {} trials", trials.len() - matching);
    }

    out.csv(
        "classify.csv",
        cols(&["trial", "seed", "rank", "k_e", "k_h", "k_f", "agreeing"]),
        trials.iter().enumerate().map(|(k, t)| {
            vec![
                k.to_string(),
                t.seed.to_string(),
                t.rank.to_string(),
                t.williamson.k_e.to_string(),
                t.williamson.k_h.to_string(),
                t.williamson.k_f.to_string(),
                t.agreeing.to_string(),
            ]
        }),
    )?;
    let report = ClassifyReport {
        model: model.to_string(),
        n: model.n(),
        seed: global.seed,
        expected,
        rank,
        trials: trials.len(),
        matching_trials: matching,
        observed,
        branch_count: branches.len(),
        expected_branch_count,
        branches,
        leaf_type_total: leaf_type.total(),
        leaf_type,
        leaf_type_valid: valid,
        passed,
    };
    out.report("classify.json", &report)?;
    Ok(passed)
}
