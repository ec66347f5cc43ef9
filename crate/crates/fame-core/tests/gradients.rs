//! Finite-difference verification of the analytic gradients for each of the
//! three geometric losses and their weighted combination, on randomized
//! small instances.
//!
//! The losses are piecewise smooth (hinge/relu kinks, the guarded cosine),
//! so central differences are only valid away from the kinks. Instances
//! whose pre-activation values sit within `SAFE_MARGIN` of a kink are
//! resampled; the losses are differentiable almost everywhere, so this
//! discards a measure-zero sliver without weakening the check.
//!
//! Two probe steps cover the two float-error regimes: a small step for
//! curvature-limited coordinates (the cosine terms), and a large one for
//! structurally-zero coordinates, where the momentum difference cancels a
//! parameter exactly and the small-step probe reads pure rounding noise
//! against the 1e-8 floor of the relative-error formula. A coordinate
//! passes if either probe agrees with the analytic value; a genuinely wrong
//! gradient fails at every step size.

use fame_core::corpus::{Corpus, ImpactSignals, MetricParams, PaperRecord};
use fame_core::embedding::{EmbeddingMatrix, EmbeddingStore, TopicModel};
use fame_core::graph::InspirationEdge;
use fame_core::manifold::{
    batch_losses, build_train_context, ArchConfig, BatchSelection, LossWeights, ManifoldModel,
    TimeEncoderConfig, TrainConfig, TrainContext, VanguardConfig,
};
use fame_core::rng::SeedRng;

const FD_EPS_SMALL: f64 = 1e-5;
const FD_EPS_LARGE: f64 = 2e-3;
const MAX_REL_ERR: f64 = 1e-4;
const SAFE_MARGIN: f64 = 3e-2;
const MIN_COSINE_NORM: f64 = 0.3;
const INSTANCES: usize = 20;

struct Instance {
    model: ManifoldModel,
    matrix: EmbeddingMatrix,
    ctx: TrainContext,
    cfg: TrainConfig,
}

fn make_instance(seed: u64, weights: LossWeights) -> Instance {
    let mut rng = SeedRng::seed_from_u64(seed);
    let n_papers = 4 + rng.index(3);
    let embed_dim = 2 + rng.index(6); // <= 8
    let d_z = 2 + rng.index(6);
    let d_topic = 2 + rng.index(6);
    let d_time = 2 * (1 + rng.index(3)); // 2, 4, 6
    let hidden = 2 + rng.index(6);
    let k_topics = 2;

    let mut records = Vec::new();
    let mut vectors = Vec::new();
    for i in 0..n_papers {
        let id = format!("p{i}");
        let biblio = if i >= 1 { vec![format!("p{}", i - 1)] } else { vec![] };
        records.push(PaperRecord {
            schema_version: 1,
            id,
            title: String::new(),
            abstract_text: String::new(),
            timestamp_days: 10.0 + 30.0 * i as f64,
            bibliography: biblio,
            signals: ImpactSignals {
                citations: rng.index(20) as f64,
                ..ImpactSignals::default()
            },
            embedding_index: None,
        });
        vectors.push((0..embed_dim).map(|_| rng.normal()).collect::<Vec<f64>>());
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let corpus = Corpus::from_records(records).unwrap();
    let store = EmbeddingStore::new(ids.clone(), EmbeddingMatrix::from_rows(vectors).unwrap()).unwrap();

    // Random centroids; topic assignment happens inside the context build.
    let centroids: Vec<f64> = (0..k_topics * embed_dim).map(|_| rng.normal()).collect();
    let topics = TopicModel {
        k: k_topics,
        dim: embed_dim,
        seed,
        centroids,
        assignments: vec![],
    };

    let edges: Vec<InspirationEdge> = (1..n_papers)
        .map(|i| InspirationEdge {
            from_id: format!("p{}", i - 1),
            to_id: format!("p{i}"),
            confidence: 1.0,
        })
        .collect();

    let cfg = TrainConfig {
        weights,
        // A macroscopic backward-difference step keeps momentum norms well
        // away from the cosine guard, where FD truncation error explodes.
        delta_t: 0.25,
        delta_align: 0.5,
        vanguard: VanguardConfig {
            tau_time_days: 50.0,
            delta_base: 0.0,
        },
        d_time,
        d_topic,
        d_z,
        hidden: vec![hidden],
        seed,
        ..TrainConfig::default()
    };

    let ctx = build_train_context(
        &corpus,
        &ids,
        &store,
        &topics,
        &edges,
        &MetricParams::default(),
        &cfg.vanguard,
    )
    .unwrap();

    let arch = ArchConfig {
        embed_dim,
        d_topic,
        d_z,
        hidden: vec![hidden],
    };
    let time = TimeEncoderConfig {
        d_time,
        t_min: 0.0,
        t_max: 200.0,
        base: 0.8,
    };
    let model = ManifoldModel::init(arch, time, k_topics, &mut rng).unwrap();

    Instance {
        model,
        matrix: store.matrix,
        ctx,
        cfg,
    }
}

/// Distances that gate FD validity: the smallest gap to any hinge/relu
/// boundary, and the smallest norm fed into a cosine (small norms blow up
/// the cosine's curvature, wrecking the central-difference truncation
/// error even where the function is smooth).
fn kink_distance(inst: &Instance) -> (f64, f64) {
    let model = &inst.model;
    let cfg = &inst.cfg;
    let mut dist = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    fn norm_gap(min_norm: &mut f64, v: &[f64]) {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        *min_norm = min_norm.min(n);
    }
    for p in &inst.ctx.papers {
        let x = inst.matrix.row(p.row);
        let z = model.map_paper(x, p.t).unwrap();
        let mu = model.spine_at(p.topic, p.t).unwrap();
        let momentum = model.spine_momentum(p.topic, p.t, cfg.delta_t).unwrap();
        let residual: Vec<f64> = z.iter().zip(&mu).map(|(a, b)| a - b).collect();
        norm_gap(&mut min_norm, &residual);
        norm_gap(&mut min_norm, &momentum);
        let cos = fame_core::embedding::cosine_similarity(&residual, &momentum).unwrap();
        if p.weight >= p.median {
            let margin = cfg.vanguard.delta_base + (1.0 - cfg.vanguard.delta_base) * p.weight_norm;
            dist = dist.min((margin - cos).abs());
        } else {
            dist = dist.min(cos.abs());
        }
    }
    for &(i, j) in &inst.ctx.edges {
        let pi = &inst.ctx.papers[i];
        let pj = &inst.ctx.papers[j];
        let zi = model.map_paper(inst.matrix.row(pi.row), pi.t).unwrap();
        let zj = model.map_paper(inst.matrix.row(pj.row), pj.t).unwrap();
        let momentum = model.spine_momentum(pj.topic, pj.t, cfg.delta_t).unwrap();
        let jump: Vec<f64> = zj.iter().zip(&zi).map(|(a, b)| a - b).collect();
        norm_gap(&mut min_norm, &jump);
        norm_gap(&mut min_norm, &momentum);
        let cos = fame_core::embedding::cosine_similarity(&jump, &momentum).unwrap();
        dist = dist.min((cfg.delta_align - cos).abs());
    }
    (dist.min(min_relu_gap(inst)), min_norm)
}

/// Smallest |pre-activation| across every hidden relu evaluated by the
/// instance (mapper once per paper, spine twice). An FD probe of size
/// `FD_EPS` can flip units closer to zero than roughly `FD_EPS * |input|`.
fn min_relu_gap(inst: &Instance) -> f64 {
    let model = &inst.model;
    let params = &model.params;
    let mut gap = f64::INFINITY;

    let mut scan = |prefix: &str, dims: &[usize], input: Vec<f64>| {
        let mut h = input;
        let last = dims.len() - 2;
        for layer in 0..dims.len() - 1 {
            let w = params.get(&format!("{prefix}.w{layer}")).unwrap().values();
            let b = params.get(&format!("{prefix}.b{layer}")).unwrap().values();
            let n_in = dims[layer];
            let mut next = Vec::with_capacity(dims[layer + 1]);
            for (row, bias) in w.chunks_exact(n_in).zip(b) {
                let pre: f64 = row.iter().zip(&h).map(|(a, x)| a * x).sum::<f64>() + bias;
                if layer != last {
                    gap = gap.min(pre.abs());
                    next.push(pre.max(0.0));
                } else {
                    next.push(pre);
                }
            }
            h = next;
        }
    };

    let arch = &model.arch;
    let time = &model.time;
    let mut mapper_dims = vec![arch.embed_dim + time.d_time];
    mapper_dims.extend_from_slice(&arch.hidden);
    mapper_dims.push(arch.d_z);
    let mut spine_dims = vec![arch.d_topic + time.d_time];
    spine_dims.extend_from_slice(&arch.hidden);
    spine_dims.push(arch.d_z);

    for p in &inst.ctx.papers {
        let t_prime = time.normalize(p.t);
        let mut mapper_in = inst.matrix.row(p.row).to_vec();
        mapper_in.extend(fame_core::manifold::time_encode_normalized(t_prime, time));
        scan("mapper", &mapper_dims, mapper_in);

        let base = params
            .get(&format!("topic.base.{}", p.topic))
            .unwrap()
            .values()
            .to_vec();
        for tp in [t_prime, t_prime - inst.cfg.delta_t] {
            let mut spine_in = base.clone();
            spine_in.extend(fame_core::manifold::time_encode_normalized(tp, time));
            scan("spine", &spine_dims, spine_in);
        }
    }
    gap
}

/// Per-coordinate: the better of the two central-difference probes.
fn two_probe_max_rel(
    params: &mut fame_core::autodiff::ParamStore,
    analytic: &fame_core::autodiff::Gradients,
    eval: &dyn Fn(&fame_core::autodiff::ParamStore) -> f64,
) -> f64 {
    let mut max_rel = 0.0f64;
    for entry_idx in 0..params.len() {
        let name = params.entries()[entry_idx].name.clone();
        for coord in 0..params.entries()[entry_idx].value.len() {
            let orig = params.get(&name).unwrap().values()[coord];
            let ga = analytic.by_index(entry_idx).values()[coord];
            let mut best = f64::INFINITY;
            for eps in [FD_EPS_SMALL, FD_EPS_LARGE] {
                params.get_mut(&name).unwrap().values_mut()[coord] = orig + eps;
                let fp = eval(params);
                params.get_mut(&name).unwrap().values_mut()[coord] = orig - eps;
                let fm = eval(params);
                params.get_mut(&name).unwrap().values_mut()[coord] = orig;
                let gn = (fp - fm) / (2.0 * eps);
                let rel = (ga - gn).abs() / (1e-8f64).max(ga.abs() + gn.abs());
                best = best.min(rel);
                if best < MAX_REL_ERR {
                    break;
                }
            }
            max_rel = max_rel.max(best);
        }
    }
    max_rel
}

fn check_loss(weights: LossWeights, label: &str) {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < INSTANCES {
        seed += 1;
        let mut inst = make_instance(seed.wrapping_mul(7919), weights);
        let (kink_gap, min_cos_norm) = kink_distance(&inst);
        if kink_gap < SAFE_MARGIN || min_cos_norm < MIN_COSINE_NORM {
            continue;
        }
        let all_papers: Vec<usize> = (0..inst.ctx.papers.len()).collect();
        let all_edges: Vec<usize> = (0..inst.ctx.edges.len()).collect();
        let sel = BatchSelection {
            papers: &all_papers,
            edges: &all_edges,
        };

        let losses =
            batch_losses(&inst.model, &inst.matrix, &inst.ctx, &sel, &inst.cfg, true).unwrap();
        let analytic = losses.grads.unwrap();

        let matrix = inst.matrix.clone();
        let ctx = inst.ctx.clone();
        let cfg = inst.cfg.clone();
        let arch = inst.model.arch.clone();
        let time = inst.model.time;
        let k_topics = inst.model.k_topics;
        let eval = |params: &fame_core::autodiff::ParamStore| {
            let probe = ManifoldModel {
                arch: arch.clone(),
                time,
                k_topics,
                params: params.clone(),
            };
            batch_losses(&probe, &matrix, &ctx, &sel, &cfg, false)
                .unwrap()
                .total
        };
        let max_rel = two_probe_max_rel(&mut inst.model.params, &analytic, &eval);
        assert!(
            max_rel < MAX_REL_ERR,
            "{label}: instance seed {seed} max relative error {max_rel}"
        );
        checked += 1;
    }
}

#[test]
fn spine_loss_gradients_match_finite_differences() {
    check_loss(
        LossWeights {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
        },
        "spine loss",
    );
}

#[test]
fn inspire_loss_gradients_match_finite_differences() {
    check_loss(
        LossWeights {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.0,
        },
        "inspiration loss",
    );
}

#[test]
fn vanguard_loss_gradients_match_finite_differences() {
    check_loss(
        LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
        },
        "vanguard loss",
    );
}

#[test]
fn combined_loss_gradients_match_finite_differences() {
    check_loss(LossWeights::default(), "combined loss");
}
