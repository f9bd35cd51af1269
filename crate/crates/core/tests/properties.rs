use std::collections::BTreeSet;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netperturb::coincidence::{coincidence, multiset_jaccard, CoincidenceParams};
use netperturb::experiments::{
    remove_random_edge, rewire_random_edge, swap_random_edges, Experiment, SignatureMatrix,
};
use netperturb::generators::{er_edge_count, gen_ba, gen_er, gen_geo, Model};
use netperturb::hcluster::{agglomerate, Dendrogram, Linkage};
use netperturb::measurements::{
    accessibility_with, assortativity, betweenness_centrality, hierarchical_degree, AccessibilityMode,
    MeasurementId, MeasurementSet,
};
use netperturb::signals::{
    classify_abc, magnitude_index, normalize_curve, pearson, pearson_vs_freevar, pop_std, progression_spearman,
    psi_index, CurveStats, Flagged, Thresholds,
};
use netperturb::Graph;

fn build(n: usize, pairs: &[(usize, usize)]) -> Graph {
    let mut g = Graph::new(n);
    for &(u, v) in pairs {
        if u != v {
            g.add_edge(u, v).unwrap();
        }
    }
    g
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| vec((0..n, 0..n), 0..=3 * n).prop_map(move |p| build(n, &p)))
}

fn arb_tree(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        vec(any::<prop::sample::Index>(), n - 1).prop_map(move |parents| {
            let pairs: Vec<_> = parents.iter().enumerate().map(|(i, p)| (i + 1, p.index(i + 1))).collect();
            build(n, &pairs)
        })
    })
}

fn arb_similarity(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_n).prop_flat_map(|n| {
        vec(0.0..1.0f64, n * (n - 1) / 2).prop_map(move |upper| {
            let mut s = vec![vec![1.0; n]; n];
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    s[i][j] = upper[k];
                    s[j][i] = upper[k];
                    k += 1;
                }
            }
            s
        })
    })
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).collect()
}

fn entropy_exp(p: &[f64]) -> f64 {
    (-p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()).exp()
}

/// Walk probabilities from dense powers of the transition matrix.
fn dense_accessibility(g: &Graph, h: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut t = vec![vec![0.0; n]; n];
    for (u, row) in t.iter_mut().enumerate() {
        for &v in g.neighbors(u) {
            row[v] = 1.0 / g.degree(u) as f64;
        }
    }
    let mut p = t.clone();
    for _ in 1..h {
        p = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k] * t[k][j]).sum()).collect())
            .collect();
    }
    (0..n)
        .map(|v| if g.degree(v) == 0 { 0.0 } else { entropy_exp(&p[v]) })
        .collect()
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        let x = (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
        if x > 1e-12 {
            1
        } else if x < -1e-12 {
            -1
        } else {
            0
        }
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0 && o3 * o4 < 0
}

fn label_partition(d: &Dendrogram, blocks: Vec<Vec<usize>>) -> BTreeSet<BTreeSet<String>> {
    blocks
        .into_iter()
        .map(|b| b.into_iter().map(|i| d.leaves[i].clone()).collect())
        .collect()
}

fn signature_from(values: &[Vec<f64>]) -> SignatureMatrix {
    let q = values[0].len();
    let cells = values
        .iter()
        .flat_map(|row| row.iter())
        .map(|&x| MeasurementSet {
            values: [x; MeasurementId::COUNT],
            flags: std::array::from_fn(|_| Vec::new()),
        })
        .collect();
    let grid: Vec<f64> = (0..values.len()).map(|t| t as f64).collect();
    let steps = (0..values.len()).collect();
    SignatureMatrix::new(Model::Er, Experiment::Removal, grid, steps, q, cells).unwrap()
}

fn arb_curve() -> impl Strategy<Value = Vec<f64>> {
    vec(-10.0..10.0f64, 5..30).prop_filter("needs spread", |r| pop_std(r) > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rings_partition_reachable_set(g in arb_graph(25), pick in any::<prop::sample::Index>()) {
        let v = pick.index(g.node_count());
        let rings = g.ring_decomposition(v, g.node_count()).unwrap();
        let dist = g.bfs_distances(v);
        let mut seen = BTreeSet::new();
        for (h, ring) in rings.rings.iter().enumerate() {
            for &w in ring {
                prop_assert!(seen.insert(w));
                prop_assert_eq!(dist[w] as usize, h);
            }
        }
        let reachable: BTreeSet<usize> = (0..g.node_count()).filter(|&w| dist[w] != u32::MAX).collect();
        prop_assert_eq!(seen, reachable);
        prop_assert_eq!(rings.rings[1].len(), g.degree(v));
        for (a, b) in g.edges() {
            if dist[a] != u32::MAX {
                prop_assert!(dist[a].abs_diff(dist[b]) <= 1);
            }
        }
    }

    #[test]
    fn all_pairs_matches_bfs(g in arb_graph(30)) {
        let d = g.all_pairs_distances();
        for u in 0..g.node_count() {
            prop_assert_eq!(d.row(u), &g.bfs_distances(u)[..]);
        }
    }

    #[test]
    fn er_has_exact_edge_count(n in 5usize..120, k in 1.0..8.0f64, seed in any::<u64>()) {
        let k = k.min((n - 1) as f64);
        let g = gen_er(n, k, seed).unwrap();
        prop_assert_eq!(g.edge_count(), er_edge_count(n, k));
        let degree_sum: usize = (0..n).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
    }

    #[test]
    fn ba_has_exact_edge_count(n in 5usize..150, m in 1usize..5, seed in any::<u64>()) {
        prop_assume!(m < n);
        let g = gen_ba(n, m, seed).unwrap();
        prop_assert_eq!(g.edge_count(), m * (m - 1) / 2 + (n - m) * m);
        for v in m..n {
            prop_assert!(g.degree(v) >= m);
        }
    }

    #[test]
    fn accessibility_level_one_is_degree(g in arb_graph(30)) {
        let acc = accessibility_with(&g, 1, AccessibilityMode::Full, None).unwrap();
        let hd = hierarchical_degree(&g, 1).unwrap();
        for v in 0..g.node_count() {
            prop_assert!((acc.per_node.as_ref().unwrap()[v] - g.degree(v) as f64).abs() < 1e-9);
            prop_assert_eq!(hd.per_node.as_ref().unwrap()[v], g.degree(v) as f64);
        }
    }

    #[test]
    fn accessibility_matches_dense_powers(g in arb_graph(20), h in 1usize..5) {
        let acc = accessibility_with(&g, h, AccessibilityMode::Full, None).unwrap();
        let per_node = acc.per_node.unwrap();
        for (v, expected) in dense_accessibility(&g, h).into_iter().enumerate() {
            prop_assert!((per_node[v] - expected).abs() < 1e-9, "node {v}: {} vs {expected}", per_node[v]);
            prop_assert!(per_node[v] <= g.node_count() as f64 + 1e-9);
            if g.degree(v) > 0 {
                prop_assert!(per_node[v] >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn tree_betweenness_sums_path_interiors(g in arb_tree(12)) {
        let total: f64 = betweenness_centrality(&g).per_node.unwrap().iter().sum();
        let d = g.all_pairs_distances();
        let mut expected = 0.0;
        for u in 0..g.node_count() {
            for v in u + 1..g.node_count() {
                expected += d.raw(u, v) as f64 - 1.0;
            }
        }
        prop_assert!((total - expected).abs() < 1e-9);
    }

    #[test]
    fn assortativity_is_a_correlation(g in arb_graph(30)) {
        prop_assume!(g.edge_count() > 0);
        let r = assortativity(&g).unwrap();
        if !r.is_degenerate() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r.value));
        }
    }

    #[test]
    fn edge_operations_keep_counts(n in 6usize..40, k in 2.0..4.0f64, seed in any::<u64>()) {
        let mut g = gen_er(n, k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let e = g.edge_count();
        prop_assume!(e >= 2 && g.non_edge_count() >= 1);

        let (removed, added) = rewire_random_edge(&mut g, &mut rng).unwrap();
        prop_assert_eq!(g.edge_count(), e);
        prop_assert!(g.has_edge(added.0, added.1));
        prop_assert!(added != removed);
        let degree_sum: usize = (0..n).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * e);

        let before: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
        swap_random_edges(&mut g, &mut rng).unwrap();
        prop_assert_eq!(g.edge_count(), e);
        prop_assert_eq!((0..n).map(|v| g.degree(v)).collect::<Vec<_>>(), before);

        let (a, b) = remove_random_edge(&mut g, &mut rng).unwrap();
        prop_assert_eq!(g.edge_count(), e - 1);
        prop_assert!(!g.has_edge(a, b));
    }

    #[test]
    fn normalized_curve_has_zero_min_unit_std(raw in arb_curve()) {
        let grid: Vec<f64> = (0..raw.len()).map(|i| i as f64).collect();
        let c = normalize_curve(MeasurementId::ALL[0], &grid, &raw);
        prop_assert!(!c.degenerate);
        let min = c.values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min.abs() < 1e-12);
        prop_assert!((pop_std(&c.values) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pearson_survives_normalization(raw in arb_curve()) {
        let grid: Vec<f64> = (0..raw.len()).map(|i| 16.0 + 3.0 * i as f64).collect();
        let c = normalize_curve(MeasurementId::ALL[0], &grid, &raw);
        let expected = pearson(&raw, &grid).unwrap();
        prop_assert!((pearson_vs_freevar(&c).value - expected).abs() < 1e-9);
    }

    #[test]
    fn labels_ignore_positive_affine_maps(raw in arb_curve(), a in 0.01..100.0f64, b in -100.0..100.0f64) {
        let label = |r: &[f64]| {
            let grid: Vec<f64> = (0..r.len()).map(|i| i as f64).collect();
            let c = normalize_curve(MeasurementId::ALL[0], &grid, r);
            let none = Flagged { value: 0.0, degenerate: false };
            let stats = CurveStats {
                psi: none,
                pearson: none,
                magnitude: magnitude_index(r),
                spearman: progression_spearman(&c),
            };
            classify_abc(&c, &stats, &Thresholds::default())
        };
        let mapped: Vec<f64> = raw.iter().map(|x| a * x + b).collect();
        prop_assert_eq!(label(&raw), label(&mapped));
    }

    #[test]
    fn psi_ignores_realization_order(
        values in (3usize..8, 2usize..6).prop_flat_map(|(r, q)| vec(vec(0.0..5.0f64, q), r)),
        shuffle in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let m = MeasurementId::ALL[0];
        let mean: Vec<f64> = values.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
        prop_assume!(pop_std(&mean) > 1e-6);
        let grid: Vec<f64> = (0..mean.len()).map(|t| t as f64).collect();
        let curve = normalize_curve(m, &grid, &mean);
        let mut order: Vec<usize> = (0..values[0].len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let permuted: Vec<Vec<f64>> = values.iter().map(|row| order.iter().map(|&q| row[q]).collect()).collect();
        let a = psi_index(&signature_from(&values), m, &curve).value;
        let b = psi_index(&signature_from(&permuted), m, &curve).value;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn coincidence_is_symmetric_and_bounded(
        (x, y) in (1usize..20).prop_flat_map(|n| (vec(0.0..10.0f64, n), vec(0.0..10.0f64, n))),
        scale in 0.001..1000.0f64,
    ) {
        let p = CoincidenceParams::default();
        let c = coincidence(&x, &y, &p).unwrap();
        prop_assert_eq!(c, coincidence(&y, &x, &p).unwrap());
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(c <= multiset_jaccard(&x, &y, &p).unwrap() + 1e-15);
        let linear = CoincidenceParams { d: 1.0, ..p };
        prop_assert!(multiset_jaccard(&x, &y, &linear).unwrap() <= 1.0);
        if x.iter().any(|&v| v > 0.0) {
            prop_assert!((coincidence(&x, &x, &p).unwrap() - 1.0).abs() < 1e-12);
        }
        let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
        prop_assert!((coincidence(&xs, &ys, &p).unwrap() - c).abs() < 1e-9);
    }

    #[test]
    fn coincidence_tightens_with_exponents(
        (x, y) in (2usize..12).prop_flat_map(|n| (vec(0.1..10.0f64, n), vec(0.1..10.0f64, n))),
        d in 1.0..8.0f64,
        e in 1.0..4.0f64,
    ) {
        let p = CoincidenceParams { delta: 0.0, d, e_exp: e };
        let c = coincidence(&x, &y, &p).unwrap();
        let stricter_d = CoincidenceParams { d: d + 1.0, ..p };
        let stricter_e = CoincidenceParams { e_exp: e + 1.0, ..p };
        prop_assert!(coincidence(&x, &y, &stricter_d).unwrap() <= c + 1e-15);
        prop_assert!(coincidence(&x, &y, &stricter_e).unwrap() <= c + 1e-15);
    }

    #[test]
    fn merge_heights_never_increase(sim in arb_similarity(10)) {
        for linkage in Linkage::ALL {
            let d = agglomerate(&sim, &labels(sim.len()), linkage).unwrap();
            prop_assert_eq!(d.merges.len(), sim.len() - 1);
            for w in d.merges.windows(2) {
                prop_assert!(w[1].height <= w[0].height);
            }
        }
    }

    #[test]
    fn lower_cuts_coarsen(sim in arb_similarity(10), cuts in vec(0.0..1.0f64, 2..6)) {
        let d = agglomerate(&sim, &labels(sim.len()), Linkage::Average).unwrap();
        let mut cuts = cuts;
        cuts.sort_by(|a, b| b.total_cmp(a));
        for w in cuts.windows(2) {
            let fine = d.cut(w[0]);
            let coarse = d.cut(w[1]);
            prop_assert!(coarse.len() <= fine.len());
            for block in &fine {
                prop_assert!(coarse.iter().any(|c| block.iter().all(|i| c.contains(i))));
            }
        }
    }

    #[test]
    fn leaf_order_does_not_matter(sim in arb_similarity(9), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = sim.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let names = labels(n);
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| order.iter().map(|&j| sim[i][j]).collect()).collect();
        let permuted_names: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
        for linkage in Linkage::ALL {
            let a = agglomerate(&sim, &names, linkage).unwrap();
            let b = agglomerate(&permuted, &permuted_names, linkage).unwrap();
            for (x, y) in a.merges.iter().zip(&b.merges) {
                prop_assert!((x.height - y.height).abs() < 1e-12);
            }
            for k in 0..n {
                prop_assert_eq!(
                    label_partition(&a, a.partition_after(k)),
                    label_partition(&b, b.partition_after(k))
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn geo_is_connected_and_planar(side in 4usize..=10, seed in any::<u64>()) {
        let g = gen_geo(side, 0.001, seed).unwrap();
        prop_assert!(g.is_connected());
        let n = g.node_count();
        prop_assert!(g.edge_count() <= 3 * n - 6);
        let xy = g.coords().unwrap();
        let edges: Vec<_> = g.edges().collect();
        for (i, &(a, b)) in edges.iter().enumerate() {
            for &(c, d) in &edges[i + 1..] {
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                prop_assert!(!segments_cross(xy[a], xy[b], xy[c], xy[d]), "{a}-{b} crosses {c}-{d}");
            }
        }
    }
}
