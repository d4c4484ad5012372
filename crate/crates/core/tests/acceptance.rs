//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::Rng;

use common::*;
use robust_bisim::coupling::maximal_support_coupling;
use robust_bisim::distance::{delta, extract_policy, policy_value, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use robust_bisim::robust::{filter, prune_relation, refine, robust_bisimilarity};
use robust_bisim::transport::min_transport;
use robust_bisim::{bisimilarity, build_example, ExampleFamily, FamilyKind, LabelledMarkovChain, PairRelation};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn family(kind: FamilyKind, num: i64, den: i64) -> LabelledMarkovChain {
    build_example(&ExampleFamily::from_ratio(kind, num, den).unwrap())
}

fn distance_of(chain: &LabelledMarkovChain, s: usize, t: usize) -> f64 {
    delta(chain, &bisimilarity(chain).to_relation(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)
        .expect("converges")
        .get(s, t)
}

fn closed_form_curve() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for den in [1024, 64, 8, 4, 2] {
        let chain = family(FamilyKind::GeometricCoin, 1, den);
        let eps = 1.0 / den as f64;
        let err = (distance_of(&chain, 0, 2) - eps / (0.5 + eps)).abs();
        check(err <= 1e-6, format!("ε = 1/{den}: error {err:e}"))?;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("max error {worst:.1e}, {elapsed:.2?}"))
}

fn worked_value() -> Outcome {
    let chain = family(FamilyKind::GeometricCoin, 1, 8);
    let d = delta(&chain, &bisimilarity(&chain).to_relation(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
    let policy = extract_policy(&chain, &d);
    let gamma = policy_value(&chain, &policy);
    check(gamma.get(0, 2) == &q(1, 5), format!("γ(h0,h1) = {}", gamma.get(0, 2)))?;
    let (h0, t, h1) = (0, 1, 2);
    let coupling = policy.coupling(h0, h1).ok_or("no coupling for (h0,h1)")?;
    let got: Vec<_> = coupling.iter().map(|(k, p)| (k, p.value().clone())).collect();
    let want = vec![((h0, t), q(1, 8)), ((h0, h1), q(3, 8)), ((t, t), q(1, 2))];
    check(got == want, format!("coupling {coupling}"))?;
    Ok("γ(h0,h1) = 1/5, coupling {(h0,h1):3/8, (h0,t):1/8, (t,t):1/2}".into())
}

fn discontinuity() -> Outcome {
    let mut lowest: f64 = 1.0;
    for kind in [FamilyKind::RiggedCoin, FamilyKind::RandomWalk] {
        let at_zero = family(kind, 0, 1);
        check(distance_of(&at_zero, 0, 2) == 0.0, format!("{kind}: δ ≠ 0 at ε = 0"))?;
        check(bisimilarity(&at_zero).same_block(0, 2), format!("{kind}: pair not bisimilar at ε = 0"))?;
        check(!robust_bisimilarity(&at_zero).same_block(0, 2), format!("{kind}: pair robust at ε = 0"))?;
        for den in [1024, 64, 8] {
            let d = distance_of(&family(kind, 1, den), 0, 2);
            check(d >= 1.0 - 1e-6, format!("{kind}, ε = 1/{den}: δ = {d}"))?;
            lowest = lowest.min(d);
        }
    }
    Ok(format!("smallest perturbed δ = {lowest:.12}"))
}

fn robust_positive() -> Outcome {
    let chain = family(FamilyKind::GeometricCoin, 0, 1);
    let (h0, t, h1) = (0, 1, 2);
    check(robust_bisimilarity(&chain).same_block(h0, h1), "(h0,h1) not robustly bisimilar")?;
    let sim = bisimilarity(&chain).to_relation();
    let w = maximal_support_coupling(chain.transition(h0), chain.transition(h1), &sim).map_err(|e| e.to_string())?;
    let got: Vec<_> = w.iter().map(|(k, p)| (k, p.value().clone())).collect();
    check(got == vec![((h0, h1), q(1, 2)), ((t, t), q(1, 2))], format!("coupling {w}"))?;
    Ok("h0 ≃ h1, coupling {(h0,h1):1/2, (t,t):1/2}".into())
}

fn prune_witness() -> Outcome {
    let (s, t, u) = (0, 1, 2);
    let a = PairRelation::from_pairs(3, [(s, s), (t, t), (u, u), (s, t), (t, s)]);
    let b = PairRelation::from_pairs(3, [(s, s), (t, t), (u, u), (s, t), (t, s), (t, u), (u, t)]);
    let pa = prune_relation(&a).map_err(|e| e.to_string())?;
    let pb = prune_relation(&b).map_err(|e| e.to_string())?;
    check(a.is_subset(&b), "A ⊄ B")?;
    check(pa == a, "Prune(A) ≠ A")?;
    check(pb == PairRelation::identity(3), "Prune(B) ≠ diagonal")?;
    check(!pa.is_subset(&pb), "Prune(A) ⊆ Prune(B)")?;
    Ok("Prune(A) = A, Prune(B) = diagonal".into())
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(0x5eed_0006);
    let (mut non_robust, mut robust_pairs) = (0, 0);
    for i in 0..200 {
        let n = rng.gen_range(1..=6);
        let labels = rng.gen_range(1..=3);
        let chain = random_chain(&mut rng, n, labels);
        let sim = matrix_of_partition(&bisimilarity(&chain));
        check(sim == naive_bisimilarity(&chain), format!("chain {i}: bisimilarity differs\n{}", chain.to_tra()))?;
        let robust = matrix_of_partition(&robust_bisimilarity(&chain));
        check(
            robust == naive_robust_bisimilarity(&chain),
            format!("chain {i}: robust bisimilarity differs\n{}", chain.to_tra()),
        )?;
        for s in 0..n {
            for t in s + 1..n {
                robust_pairs += robust[s][t] as usize;
                non_robust += (sim[s][t] && !robust[s][t]) as usize;
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("200 chains, {robust_pairs} robust and {non_robust} non-robust bisimilar pairs, {elapsed:.2?}"))
}

fn distance_properties() -> Outcome {
    let mut rng = rng(0x5eed_0007);
    let mut worst_triangle: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(2..=8);
        let labels = rng.gen_range(1..=3);
        let chain = random_chain(&mut rng, n, labels);
        let sim = bisimilarity(&chain);
        let d = delta(&chain, &sim.to_relation(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
        for s in 0..n {
            for t in 0..n {
                check(
                    (d.get(s, t) < 1e-8) == sim.same_block(s, t),
                    format!("chain {i}: δ({s},{t}) = {:e} but bisimilar = {}", d.get(s, t), sim.same_block(s, t)),
                )?;
                check(d.get(s, t) == d.get(t, s), format!("chain {i}: asymmetric at ({s},{t})"))?;
                for u in 0..n {
                    let excess = d.get(s, u) - d.get(s, t) - d.get(t, u);
                    worst_triangle = worst_triangle.max(excess);
                    check(excess <= 3e-9, format!("chain {i}: triangle ({s},{t},{u}) off by {excess:e}"))?;
                }
            }
        }
    }
    Ok(format!("100 chains, worst triangle excess {worst_triangle:.1e}"))
}

fn fixed_point_properties() -> Outcome {
    let mut rng = rng(0x5eed_0008);
    for i in 0..200 {
        let n = rng.gen_range(1..=8);
        let labels = rng.gen_range(1..=3);
        let chain = random_chain(&mut rng, n, labels);
        let sim = bisimilarity(&chain).to_relation();
        let robust = robust_bisimilarity(&chain).to_relation();
        check(robust.is_subset(&sim), format!("chain {i}: ≃ ⊄ ∼"))?;
        check(refine(&chain, &robust).map_err(|e| e.to_string())? == robust, format!("chain {i}: Refine(≃) ≠ ≃"))?;
        check(filter(&chain, &robust).map_err(|e| e.to_string())? == robust, format!("chain {i}: Filter(≃) ≠ ≃"))?;
    }
    Ok("200 chains".into())
}

fn transport_oracle() -> Outcome {
    let mut rng = rng(0x5eed_0009);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let (m, n) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let mu = random_full_distribution(&mut rng, m, 0);
        let nu = random_full_distribution(&mut rng, n, 3);
        // a few distinct cost levels make ties and degenerate optima common
        let cost: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..=4) as f64 / 4.0 * rng.gen::<f64>()).collect()).collect();
        let cost_fn = |u: usize, v: usize| cost[u][v - 3];
        let solution = min_transport(cost_fn, &mu, &nu);
        let a: Vec<BigRational> = mu.iter().map(|(_, p)| p.value().clone()).collect();
        let b: Vec<BigRational> = nu.iter().map(|(_, p)| p.value().clone()).collect();
        let best = vertex_values(&a, &b, &cost).into_iter().map(|(v, _)| v).fold(f64::INFINITY, f64::min);
        let err = (solution.value - best).abs();
        worst = worst.max(err);
        check(err <= 1e-12, format!("instance {i}: solver {} vs enumeration {best}", solution.value))?;
        check(robust_bisim::coupling::verify_coupling(&solution.coupling, &mu, &nu), format!("instance {i}: bad marginals"))?;
    }
    Ok(format!("500 instances, max error {worst:.1e}"))
}

fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn scale_smoke() -> Outcome {
    let mut rng = rng(0x5eed_0010);
    let chain = random_chain(&mut rng, 200, 3);
    let start = Instant::now();
    let robust = robust_bisimilarity(&chain);
    let elapsed = start.elapsed();
    let sim = bisimilarity(&chain);
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    let memory = peak_memory_kib();
    if let Some(kib) = memory {
        check(kib < 1024 * 1024, format!("peak memory {kib} KiB"))?;
    }
    Ok(format!(
        "200 states, {} ∼-blocks, {} ≃-blocks, {elapsed:.2?}, peak memory {}",
        sim.num_blocks(),
        robust.num_blocks(),
        memory.map_or("unknown".to_string(), |k| format!("{} MiB", k / 1024))
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form distance curve", closed_form_curve),
        ("exact worked value 1/5", worked_value),
        ("discontinuity signatures", discontinuity),
        ("robustness positive case", robust_positive),
        ("prune non-monotonicity", prune_witness),
        ("oracle equivalence", oracle_equivalence),
        ("distance zero set and pseudometric", distance_properties),
        ("fixed point and subset properties", fixed_point_properties),
        ("transport vertex enumeration", transport_oracle),
        ("200-state smoke test", scale_smoke),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
