use mutfreq::analytics::{ks_distance, mean_and_se, two_sample_ks, variance_and_se};
use mutfreq::distributions::{ld_pmf, LdParams};
use mutfreq::rng::{run_replicates, StreamFactory};
use mutfreq::simulate::*;

fn runs(
    mutation: &MutationModel,
    fitness: &FitnessModel,
    options: SimOptions,
    n: usize,
    reps: usize,
    seed: u64,
) -> Vec<SimOutcome> {
    let sim = Simulator::new(mutation, fitness, options).unwrap();
    run_replicates(&StreamFactory::new(seed), 0, reps, |_, rng| sim.run(n, rng).unwrap())
}

#[test]
fn two_cells_enumerate_exactly() {
    let mu = 0.3;
    let m = MutationModel::uniform(1, mu).unwrap();
    let reps = 100_000;
    let out = runs(&m, &FitnessModel::yule(), SimOptions::default(), 2, reps, 21);
    let mut hist = [0usize; 3];
    for o in &out {
        assert_eq!(o.b, o.b_hat);
        assert_eq!(o.b, o.events);
        hist[o.b[0] as usize] += 1;
    }
    let probs = [(1.0 - mu) * (1.0 - mu), 2.0 * mu * (1.0 - mu), mu * mu];
    for k in 0..3 {
        let f = hist[k] as f64 / reps as f64;
        let se = (probs[k] * (1.0 - probs[k]) / reps as f64).sqrt();
        assert!((f - probs[k]).abs() <= 4.0 * se, "k={k}: {f} vs {}", probs[k]);
    }
}

#[test]
fn single_site_count_is_luria_delbruck() {
    let m = MutationModel::uniform(1, 1e-3).unwrap();
    let out = runs(&m, &FitnessModel::yule(), SimOptions::default(), 1000, 10_000, 22);
    let b: Vec<u64> = out.iter().map(|o| o.b[0] as u64).collect();
    let pmf = ld_pmf(&LdParams::new(2.0).unwrap(), 5000);
    let d = ks_distance(&b, &pmf).unwrap();
    assert!(d <= 0.015, "KS {d}");
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[start]] {
            end += 1;
        }
        let mid = (start + end) as f64 / 2.0;
        for &i in &idx[start..=end] {
            r[i] = mid;
        }
        start = end + 1;
    }
    r
}

fn pairwise_correlations(cols: &[Vec<f64>]) -> Vec<f64> {
    let m = cols[0].len() as f64;
    let z: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / m;
            let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt();
            c.iter().map(|x| (x - mean) / sd).collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            out.push(z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / m);
        }
    }
    out
}

#[test]
fn sites_are_independent() {
    // B is heavy tailed, so the largest of 1225 Pearson correlations exceeds
    // 4/sqrt(reps) even for independent draws; ranks make the null law free
    // of the marginal, and the Pearson spread must still be 1/sqrt(reps)
    let sites = 50;
    let reps = 10_000;
    let m = MutationModel::uniform(sites, 1e-3).unwrap();
    let out = runs(&m, &FitnessModel::yule(), SimOptions::default(), 1000, reps, 23);
    let cols: Vec<Vec<f64>> = (0..sites)
        .map(|i| out.iter().map(|o| o.b[i] as f64).collect())
        .collect();
    let bound = 4.0 / (reps as f64).sqrt();
    let ranked: Vec<Vec<f64>> = cols.iter().map(|c| ranks(c)).collect();
    let worst = pairwise_correlations(&ranked)
        .into_iter()
        .fold(0.0f64, |w, r| w.max(r.abs()));
    assert!(worst <= bound, "largest |rank correlation| {worst} exceeds {bound}");

    let pearson = pairwise_correlations(&cols);
    let k = pearson.len() as f64;
    let mean = pearson.iter().sum::<f64>() / k;
    let sd = (pearson.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / k).sqrt();
    let null_sd = 1.0 / (reps as f64).sqrt();
    assert!(mean.abs() <= 4.0 * null_sd / k.sqrt(), "mean correlation {mean}");
    assert!((sd / null_sd - 1.0).abs() <= 0.15, "correlation spread {sd}");
}

#[test]
fn uniform_and_class_paths_agree() {
    let m = MutationModel::uniform(3, 5e-3).unwrap();
    let y = FitnessModel::yule();
    let reps = 5000;
    let fast = runs(&m, &y, SimOptions::default(), 200, reps, 24);
    let slow = runs(
        &m,
        &y,
        SimOptions {
            force_general: true,
            ..SimOptions::default()
        },
        200,
        reps,
        25,
    );
    // DKW-type bound for two samples at level 1e-3
    let crit = 1.95 * (2.0 / reps as f64).sqrt();
    for i in 0..3 {
        let x: Vec<u64> = fast.iter().map(|o| o.b[i] as u64).collect();
        let z: Vec<u64> = slow.iter().map(|o| o.b[i] as u64).collect();
        assert!(two_sample_ks(&x, &z).unwrap() <= crit);
        let x: Vec<u64> = fast.iter().map(|o| o.b_hat[i] as u64).collect();
        let z: Vec<u64> = slow.iter().map(|o| o.b_hat[i] as u64).collect();
        assert!(two_sample_ks(&x, &z).unwrap() <= crit);
    }
    for o in fast.iter().chain(&slow) {
        assert_eq!(o.divisions, 199);
        assert_eq!(o.deaths, 0);
    }
}

#[test]
fn yule_event_counts_are_binomial() {
    let (n, mu, reps) = (100usize, 0.01, 5000);
    let m = MutationModel::uniform(1, mu).unwrap();
    let out = runs(&m, &FitnessModel::yule(), SimOptions::default(), n, reps, 26);
    let x: Vec<f64> = out.iter().map(|o| o.events[0] as f64).collect();
    let trials = 2.0 * n as f64 - 2.0;
    let (mean, se) = mean_and_se(&x);
    assert!((mean - trials * mu).abs() <= 4.0 * se);
    let (var, vse) = variance_and_se(&x);
    assert!((var - trials * mu * (1.0 - mu)).abs() <= 4.0 * vse);
}

#[test]
fn first_split_is_uniform() {
    // the number of cells descending from the founder's first daughter is
    // uniform on 1..n-1 (Pólya urn)
    let n = 50;
    let reps = 4000;
    let m = MutationModel::uniform(1, 0.0).unwrap();
    let opts = SimOptions {
        keep_tree: true,
        ..SimOptions::default()
    };
    let out = runs(&m, &FitnessModel::yule(), opts, n, reps, 27);
    let sizes: Vec<u64> = out
        .iter()
        .map(|o| {
            let tree = o.tree.as_ref().unwrap();
            let fr = descendant_fractions(tree).unwrap();
            let first = tree.children(0)[0];
            (fr[&first] * n as f64).round() as u64
        })
        .collect();
    let mut pmf = vec![0.0; n];
    for p in pmf.iter_mut().skip(1) {
        *p = 1.0 / (n as f64 - 1.0);
    }
    let dkw = ((2.0f64 / 1e-3).ln() / (2.0 * reps as f64)).sqrt();
    assert!(ks_distance(&sizes, &pmf).unwrap() <= dkw);
}

#[test]
fn descendant_bound_holds_with_death_and_selection() {
    let m = MutationModel::uniform(6, 0.02).unwrap();
    let table = [(vec![(1u32, mutfreq::Nucleotide::A)], Rates::new(1.6, 0.2).unwrap())]
        .into_iter()
        .collect();
    let f = FitnessModel::new(vec![1], Rates::new(1.0, 0.4).unwrap(), table).unwrap();
    let out = runs(&m, &f, SimOptions::default(), 300, 300, 28);
    for o in &out {
        assert_eq!(o.census.values().sum::<u64>(), 300);
        assert_eq!(o.divisions, 299 + o.deaths);
        for i in 0..6 {
            assert!(o.b[i] <= o.b_hat[i] && o.b_hat[i] <= 300);
        }
    }
}
