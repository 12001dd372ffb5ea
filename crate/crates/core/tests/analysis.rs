mod common;

use calibrex::analysis::{
    boxplot_stats, correlation_matrix, edge_preference_histogram, hcs, kendall_tau, size_brackets,
    MetricTable,
};
use calibrex::archspace::{enumerate_sss, TssArch};
use common::tau_b_ref;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (accuracy %, ECE %, HCS_1, HCS_2, HCS_3) rows of the published search table.
const PUBLISHED: [(f64, f64, f64, f64, f64); 12] = [
    (93.91, 4.20, 94.84, 95.16, 95.32),
    (94.01, 4.25, 94.87, 95.16, 95.31),
    (93.52, 4.15, 94.67, 95.06, 95.26),
    (93.94, 4.17, 94.88, 95.19, 95.35),
    (93.98, 4.09, 94.94, 95.26, 95.42),
    (93.59, 4.21, 94.68, 95.05, 95.23),
    (93.80, 4.14, 94.82, 95.17, 95.34),
    (93.73, 4.05, 94.83, 95.20, 95.39),
    (93.06, 4.12, 94.45, 94.92, 95.16),
    (93.62, 3.90, 94.84, 95.26, 95.47),
    (93.57, 3.91, 94.81, 95.24, 95.45),
    (93.55, 4.23, 94.65, 95.02, 95.21),
];

#[test]
fn hcs_reproduces_published_rows() {
    for (acc, ece, h1, h2, h3) in PUBLISHED {
        for (beta, want) in [(1.0, h1), (2.0, h2), (3.0, h3)] {
            let got = 100.0 * hcs(acc / 100.0, ece / 100.0, beta).unwrap();
            assert!((got - want).abs() <= 0.01, "acc {acc} ece {ece} beta {beta}: {got}");
        }
    }
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, cols: usize) -> MetricTable {
    let names = (0..cols).map(|c| format!("c{c}")).collect();
    let data = (0..cols)
        .map(|_| (0..n).map(|_| (rng.gen_range(0..25) as f64) / 25.0).collect())
        .collect();
    MetricTable::new((0..n as u64).collect(), names, data).unwrap()
}

#[test]
fn correlation_cells_match_pairwise_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = random_table(&mut rng, 150, 3);
    let m = correlation_matrix(&t, &["c0", "c1", "c2"]).unwrap();
    for a in ["c0", "c1", "c2"] {
        for b in ["c0", "c1", "c2"] {
            let want = if a == b { Some(1.0) } else { tau_b_ref(t.column(a).unwrap(), t.column(b).unwrap()) };
            let got = m.get(a, b);
            assert!((got.unwrap() - want.unwrap()).abs() < 1e-12);
            assert_eq!(got, m.get(b, a));
        }
    }
}

#[test]
fn negated_column_is_perfectly_discordant() {
    let x: Vec<f64> = (0..20).map(|i| (i * 7 % 13) as f64).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let t = MetricTable::new((0..20).collect(), vec!["x".into(), "neg".into()], vec![x.clone(), neg]).unwrap();
    let m = correlation_matrix(&t, &["x", "neg"]).unwrap();
    assert_eq!(m.get("x", "neg"), Some(-1.0));
    let one = correlation_matrix(&t, &["x"]).unwrap();
    assert_eq!(one.cells, vec![vec![Some(1.0)]]);
    assert_eq!(kendall_tau(&x, &x).unwrap(), Some(1.0));
}

#[test]
fn top_k_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.gen_range(10..100);
        let t = random_table(&mut rng, n, 2);
        let v = t.column("c0").unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
        let mut want: Vec<u64> = order[..10].iter().map(|&i| i as u64).collect();
        want.sort();
        assert_eq!(t.top_k_by("c0", 10).unwrap().arch_index(), want.as_slice());
    }
}

#[test]
fn boxplot_matches_sorted_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.gen_range(1..60);
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        let b = boxplot_stats(&v).unwrap();
        assert_eq!(b.min, s[0]);
        assert_eq!(b.max, s[n - 1]);
        for (got, p) in [(b.q1, 0.25), (b.median, 0.5), (b.q3, 0.75)] {
            assert!((got - q(p)).abs() < 1e-12);
        }
        assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
    }
}

#[test]
fn size_brackets_match_direct_grouping() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let archs = enumerate_sss();
    let picked: Vec<_> = (0..400).map(|_| archs[rng.gen_range(0..archs.len())]).collect();
    let sizes: Vec<f64> = picked.iter().map(|a| a.model_size() as f64).collect();
    let values: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
    let t = MetricTable::new((0..400).collect(), vec!["size".into(), "ece".into()], vec![sizes.clone(), values.clone()]).unwrap();
    let edges = [40.0, 120.0, 200.0, 260.0, 320.0];
    let got = size_brackets(&t, "size", "ece", &edges).unwrap();
    assert_eq!(got.iter().map(|b| b.count).sum::<usize>(), 400);
    for (i, b) in got.iter().enumerate() {
        let members: Vec<f64> = (0..400)
            .filter(|&r| sizes[r] >= edges[i] && (sizes[r] < edges[i + 1] || (i == 3 && sizes[r] <= edges[4])))
            .map(|r| values[r])
            .collect();
        assert_eq!(b.count, members.len());
        assert_eq!(b.stats, Some(boxplot_stats(&members).unwrap()));
    }
    let all = size_brackets(&t, "size", "ece", &[40.0, 320.0]).unwrap();
    assert_eq!(all[0].stats, Some(boxplot_stats(&values).unwrap()));
}

#[test]
#[allow(clippy::needless_range_loop)]
fn edge_histogram_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let archs: Vec<TssArch> = (0..20).map(|_| TssArch::from_index(rng.gen_range(0..15_625)).unwrap()).collect();
    let h = edge_preference_histogram(&archs);
    for edge in 0..6 {
        for op in 0..5 {
            let want = archs.iter().filter(|a| a.ops[edge].code() == op).count();
            assert_eq!(h[edge][op], want);
        }
    }
    let same = edge_preference_histogram(&[archs[0]; 7]);
    for edge in 0..6 {
        assert_eq!(same[edge][archs[0].ops[edge].code()], 7);
        assert_eq!(same[edge].iter().filter(|&&c| c > 0).count(), 1);
    }
}
