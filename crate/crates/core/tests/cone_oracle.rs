//! Directional limiting normal cones versus the sequential-definition
//! sampler, on random small unions. The stratum composition formula is an
//! implementation theorem; this suite is its evidence.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use robstab_core::exactla::{rint, rq, Rat, RatMatrix};
use robstab_core::polycal::{
    directional_from_strata, enumerate_strata, in_cone_union, oracle, Polyhedron, PolyUnion,
};

fn random_union(rng: &mut impl Rng) -> PolyUnion {
    let dim = rng.gen_range(2..=3usize);
    let n_pieces = rng.gen_range(1..=3usize);
    let mut pieces = Vec::new();
    for _ in 0..n_pieces {
        let rows = rng.gen_range(1..=2usize);
        let mut a = Vec::new();
        for _ in 0..rows {
            let r: Vec<Rat> = (0..dim).map(|_| rint(rng.gen_range(-2..=2))).collect();
            a.push(r);
        }
        // conic pieces through the origin so every row is active there
        let b = vec![Rat::from_integer(0.into()); a.len()];
        if let Ok(p) = Polyhedron::new(RatMatrix::from_rows(a).unwrap(), b, dim) {
            pieces.push(p);
        }
    }
    if pieces.is_empty() {
        pieces.push(Polyhedron::nonpos_orthant(dim));
    }
    PolyUnion::new(pieces).unwrap()
}

#[test]
fn directional_cones_agree_with_definition_sampler() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240);
    let mut unions = 0usize;
    let mut queries = 0usize;
    let mut disagreements = 0usize;
    while unions < 50 {
        let c = random_union(&mut rng);
        let z = vec![Rat::from_integer(0.into()); c.dim];
        let strata = match enumerate_strata(&c, &z) {
            Ok(s) => s,
            Err(_) => continue,
        };
        unions += 1;
        let dirs = oracle::direction_dictionary(&c, &z, &mut rng, 8);
        let cell_witnesses = oracle::arrangement_witnesses(&c, &z);
        let mut orc = oracle::DirectionalOracle::new(&c, &z);

        // a few probe directions per union: tangent cell witnesses + random
        let mut ws: Vec<Vec<Rat>> = Vec::new();
        ws.push(vec![Rat::from_integer(0.into()); c.dim]);
        for st in strata.list.iter().take(2) {
            if let Ok(Some(p)) = st.direction_cone.strict_point() {
                ws.push(p);
            }
        }
        while ws.len() < 4 {
            ws.push((0..c.dim).map(|_| rq(rng.gen_range(-4..=4), 2)).collect());
        }

        for w in &ws {
            // Perturbations toward each arrangement cell: for a conic cell
            // with closure containing w, the segment from w into the cell
            // interior stays in the cell.
            let mut w_dirs = dirs.clone();
            for u in &cell_witnesses {
                let g: Vec<Rat> = u.iter().zip(w).map(|(ui, wi)| ui - wi).collect();
                if g.iter().any(|x| !x.is_zero()) {
                    w_dirs.push(g);
                }
            }
            let computed = directional_from_strata(&strata, w).unwrap();
            // query vectors: random plus generators of the computed cones
            let mut vs: Vec<Vec<Rat>> = (0..25)
                .map(|_| (0..c.dim).map(|_| rq(rng.gen_range(-4..=4), 2)).collect())
                .collect();
            for k in &computed {
                if let Ok(vc) = robstab_core::exactla::hcone_to_vcone(k) {
                    vs.extend(vc.generators_signed());
                }
            }
            for v in &vs {
                queries += 1;
                let strata_answer = in_cone_union(&computed, v);
                let oracle_answer = orc.membership(w, v, &w_dirs, 7..10);
                if strata_answer != oracle_answer {
                    disagreements += 1;
                    eprintln!(
                        "disagreement: dim {} pieces {} w {:?} v {:?} strata {} oracle {}",
                        c.dim,
                        c.pieces.len(),
                        w,
                        v,
                        strata_answer,
                        oracle_answer
                    );
                }
            }
        }
    }
    assert!(queries >= 50 * 100, "only {queries} queries run");
    assert_eq!(disagreements, 0, "{disagreements}/{queries} disagreements");
}
