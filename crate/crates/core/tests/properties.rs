use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ieprot::chemistry::{detect_hydrogen_bonds, infer_covalent_bonds, place_amide_hydrogens};
use ieprot::geometry::{add, dist, mat_vec, uniform_rotation, Vec3};
use ieprot::multigraph::format::{deserialize_graph, serialize_graph};
use ieprot::multigraph::{
    ball_query, build_neighbor_table, graph_from_structure, hop_distances, Adjacency, NeighborhoodVariant,
};
use ieprot::net::{predict, prepare_protein, BatchInput, ModelConfig, ModelParams};
use ieprot::pooling::{build_hierarchy, PoolingMatrix};
use ieprot::structure::write_pdb;
use ieprot::synth;
use ieprot::{parse_pdb, ProteinStructure};

fn protein(seed: u64, len: usize) -> ProteinStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::toy_protein(&mut rng, "prop", (seed % 2) as usize, len)
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, span: f64) -> Vec<Vec3> {
    (0..n).map(|_| [0; 3].map(|_: i32| rng.random_range(-span..span))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pdb_text_round_trips(seed in any::<u64>(), len in 1usize..12) {
        let s = protein(seed, len);
        let text = write_pdb(&s);
        let once = parse_pdb(text.as_bytes()).unwrap();
        prop_assert_eq!(&once, &parse_pdb(text.as_bytes()).unwrap());
        let twice = parse_pdb(write_pdb(&once).as_bytes()).unwrap();
        prop_assert_eq!(&once.residues, &twice.residues);
        let offsets = once.residue_offsets();
        let owners = once.residue_of_atoms();
        prop_assert_eq!(owners.len(), once.atom_count());
        for (r, res) in once.residues.iter().enumerate() {
            prop_assert!(owners[offsets[r]..offsets[r] + res.atoms.len()].iter().all(|&o| o == r));
        }
    }

    #[test]
    fn graph_file_round_trip_is_bit_exact(seed in any::<u64>(), len in 1usize..12) {
        let g = graph_from_structure(&protein(seed, len), true).unwrap();
        let back = deserialize_graph(&serialize_graph(&g)).unwrap();
        let bits = |p: &[[f32; 3]]| p.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.positions), bits(&g.positions));
        prop_assert_eq!(back, g);
    }

    #[test]
    fn bonds_are_rigid_invariant(seed in any::<u64>(), len in 2usize..14) {
        let s = protein(seed, len);
        let g = graph_from_structure(&s, true).unwrap();
        prop_assert!(g.adj_a.is_subset_of(&g.adj_b));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let rot = uniform_rotation(rng.random(), rng.random(), rng.random());
        let mut moved = s.clone();
        synth::transform(&mut moved.residues, &rot, [12.5, -3.0, 40.0]);
        prop_assert_eq!(infer_covalent_bonds(&moved).unwrap(), infer_covalent_bonds(&s).unwrap());
        let h = detect_hydrogen_bonds(&s, &place_amide_hydrogens(&s));
        let hm = detect_hydrogen_bonds(&moved, &place_amide_hydrogens(&moved));
        prop_assert_eq!(h, hm);
    }

    #[test]
    fn kernel_inputs_are_rigid_invariant_and_ordered(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 6.0);
        let a_edges = random_edges(&mut rng, n, 0.08);
        let mut b_edges = a_edges.clone();
        b_edges.extend(random_edges(&mut rng, n, 0.05));
        let a = Adjacency::from_edges(n, a_edges).unwrap();
        let b = Adjacency::from_edges(n, b_edges).unwrap();
        let table = build_neighbor_table(&pts, &a, &b, 4.0, 6, 6, NeighborhoodVariant::Euclidean).unwrap();
        let rot = uniform_rotation(rng.random(), rng.random(), rng.random());
        let moved: Vec<Vec3> = pts.iter().map(|&p| add(mat_vec(&rot, p), [3.0, -7.0, 1.5])).collect();
        let table_m = build_neighbor_table(&moved, &a, &b, 4.0, 6, 6, NeighborhoodVariant::Euclidean).unwrap();
        prop_assert_eq!(&table.offsets, &table_m.offsets);
        prop_assert_eq!(&table.neighbors, &table_m.neighbors);
        for c in 0..n {
            let mut saw_self = false;
            for ((i, k), (_, km)) in table.neighbors_of(c).zip(table_m.neighbors_of(c)) {
                prop_assert!(dist(pts[c], pts[i]) <= 4.0);
                for v in [k.de_norm, k.di1_norm, k.di2_norm] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(k.di1_norm >= k.di2_norm);
                prop_assert!((k.de_norm - km.de_norm).abs() < 1e-12);
                prop_assert_eq!((k.di1_norm, k.di2_norm), (km.di1_norm, km.di2_norm));
                if i == c {
                    saw_self = true;
                    prop_assert_eq!((k.de_norm, k.di1_norm, k.di2_norm), (0.0, 0.0, 0.0));
                }
            }
            prop_assert!(saw_self);
        }
    }

    #[test]
    fn ball_query_commutes_with_relabeling(seed in any::<u64>(), n in 1usize..60, r in 0.5f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, 5.0);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut permuted = vec![[0.0; 3]; n];
        for (i, &p) in perm.iter().enumerate() {
            permuted[p] = pts[i];
        }
        let center = pts[0];
        let mut mapped: Vec<usize> = ball_query(&pts, center, r).into_iter().map(|i| perm[i]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, ball_query(&permuted, center, r));
        let linear: Vec<usize> = (0..n).filter(|&i| dist(pts[i], center) <= r).collect();
        prop_assert_eq!(ball_query(&pts, center, r), linear);
    }

    #[test]
    fn hop_counts_obey_triangle_inequality(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = Adjacency::from_edges(n, random_edges(&mut rng, n, 0.1)).unwrap();
        let cap = n as u32;
        let all: Vec<_> = (0..n).map(|s| hop_distances(&adj, s, cap)).collect();
        for _ in 0..50 {
            let (x, y, z) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
            if let (Some(&xy), Some(&yz)) = (all[x].get(&y), all[y].get(&z)) {
                let xz = all[x].get(&z).copied();
                prop_assert!(xz.is_some_and(|d| d <= xy + yz));
            }
            prop_assert_eq!(all[x].get(&y), all[y].get(&x));
        }
    }

    #[test]
    fn pooling_preserves_mean_symmetry_and_connectivity(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![0u32; n];
        for (k, &i) in order.iter().enumerate() {
            assignment[i] = if k < m { k as u32 } else { rng.random_range(0..m as u32) };
        }
        let pool = PoolingMatrix::new(assignment, m).unwrap();
        let cols = 4;
        let values: Vec<f64> = (0..n * cols).map(|_| rng.random_range(-5.0..5.0)).collect();
        let pooled = pool.pool_rows(&values, cols);
        for c in 0..cols {
            let before: f64 = (0..n).map(|i| values[i * cols + c]).sum::<f64>() / n as f64;
            let after: f64 = (0..m).map(|j| f64::from(pool.cluster_sizes[j]) * pooled[j * cols + c]).sum::<f64>() / n as f64;
            prop_assert!((before - after).abs() < 1e-12);
        }
        let adj = Adjacency::from_edges(n, random_edges(&mut rng, n, 0.1)).unwrap();
        let coarse = pool.pool_adjacency(&adj);
        for j in 0..m {
            prop_assert!(!coarse.contains(j, j));
            for &l in coarse.neighbors(j) {
                prop_assert!(coarse.contains(l as usize, j));
            }
        }
        prop_assert!(coarse.components() <= adj.components());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hierarchy_levels_are_symmetric_and_scores_have_fixed_shape(seed in any::<u64>(), len in 1usize..30) {
        let s = protein(seed, len);
        let g = graph_from_structure(&s, true).unwrap();
        let h = build_hierarchy(&s, &g).unwrap();
        h.validate().unwrap();
        for (l, level) in h.levels.iter().enumerate() {
            for adj in [&level.adj_a, &level.adj_b] {
                for i in 0..level.node_count() {
                    prop_assert!(!adj.contains(i, i));
                    prop_assert!(adj.neighbors(i).iter().all(|&j| adj.contains(j as usize, i)));
                }
            }
            if l > 0 {
                prop_assert!(level.adj_a.components() <= h.levels[l - 1].adj_a.components());
            }
        }
        let config = ModelConfig { width_scale: 1.0 / 16.0, head_hidden: 32, num_classes: 5, ..ModelConfig::default() };
        let params = ModelParams::<f32>::init(&config).unwrap();
        let input = prepare_protein(&h, &config).unwrap();
        let scores = predict(&BatchInput::from_proteins(&[&input, &input]).unwrap(), &params, &config).unwrap();
        prop_assert_eq!(scores.len(), 2);
        prop_assert!(scores.iter().all(|r| r.len() == 5 && r.iter().all(|v| v.is_finite())));
    }
}
