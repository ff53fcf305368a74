//! Operator-level structure: Hermiticity under random assembly, min-max
//! monotonicity in the couplings, and the magnetic spectrum checks.

use nalgebra::DVector;
use rand::Rng;
use wegnerlab::experiments::{
    draw_couplings, landau_band, EnergyPolicy, ExperimentConfig, ModelSpec,
};
use wegnerlab::measures::MeasureSpec;
use wegnerlab::operators::{
    assemble_anderson, build_background, BoxSpec, CellPotential, CouplingField, PotentialSpec,
    SingleSitePotential, HERMITICITY_TOL,
};
use wegnerlab::seeding::substream;
use wegnerlab::spectra::eigensolve;

#[test]
fn random_hamiltonians_are_hermitian() {
    let measure = MeasureSpec::uniform(-1.0, 2.0).unwrap();
    for (dim, l, n) in [(1usize, 16usize, 2usize), (2, 5, 2)] {
        let bx = BoxSpec::new(dim, l, n).unwrap();
        let u = SingleSitePotential::cosine_bump(dim, n, 0.7).unwrap();
        let h0 = build_background(&bx, &CellPotential::Constant { value: 0.3 }, 0.0).unwrap();
        for r in 0..5u64 {
            let field = draw_couplings(&bx, &measure, 31, r);
            let v = assemble_anderson(&bx, &u, &field).unwrap();
            let h = h0.add(&v).unwrap();
            assert!(h.hermiticity_defect() <= HERMITICITY_TOL);
        }
    }
}

#[test]
fn eigenvalues_monotone_in_couplings() {
    // Min-max: raising every coupling (with u ≥ 0) cannot lower any
    // eigenvalue. Twenty coupled random pairs, dimensions up to 256.
    let mut rng = substream(404, &[0]);
    for pair_idx in 0..20u64 {
        let l = 16 + (rng.random::<u64>() as usize) % 48; // up to 64 cells
        let n = 1 + (rng.random::<u64>() as usize) % 2; // dim ≤ 128·2 = 256
        let bx = BoxSpec::new(1, l, n).unwrap();
        let u = SingleSitePotential::cosine_bump(1, n, 0.4 + 0.8 * rng.random::<f64>()).unwrap();
        let h0 = build_background(&bx, &CellPotential::zero(), 0.0).unwrap();
        let low: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
        let bump: Vec<f64> = (0..l).map(|_| 0.5 * rng.random::<f64>()).collect();
        let high: Vec<f64> = low.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let spectrum = |vals: Vec<f64>| {
            let field = CouplingField::from_values(&bx, vals).unwrap();
            let v = assemble_anderson(&bx, &u, &field).unwrap();
            eigensolve(&h0.add(&v).unwrap(), false).unwrap().eigenvalues
        };
        let e_low = spectrum(low);
        let e_high = spectrum(high);
        for (k, (a, b)) in e_low.iter().zip(&e_high).enumerate() {
            assert!(
                a <= &(b + 1e-10),
                "pair {pair_idx}: eigenvalue {k} dropped: {a} > {b}"
            );
        }
    }
}

#[test]
fn counting_function_monotone_under_coupled_raise() {
    // The same coupling in terms of the counting function: raising every
    // ω_j moves eigenvalues up, so N(E) cannot increase.
    let bx = BoxSpec::new(1, 32, 1).unwrap();
    let u = SingleSitePotential::cell_indicator(1, 1);
    let h0 = build_background(&bx, &CellPotential::zero(), 0.0).unwrap();
    let measure = MeasureSpec::uniform(0.0, 1.0).unwrap();
    for r in 0..10u64 {
        let field = draw_couplings(&bx, &measure, 77, r);
        let raised = CouplingField {
            values: field.values.iter().map(|v| v + 0.25).collect(),
        };
        let sd_low = eigensolve(
            &h0.add(&assemble_anderson(&bx, &u, &field).unwrap())
                .unwrap(),
            false,
        )
        .unwrap();
        let sd_high = eigensolve(
            &h0.add(&assemble_anderson(&bx, &u, &raised).unwrap())
                .unwrap(),
            false,
        )
        .unwrap();
        for e in [0.5, 1.5, 2.5, 3.5, 4.5] {
            assert!(sd_high.counting_function(e) <= sd_low.counting_function(e));
        }
    }
}

#[test]
fn lowest_landau_cluster_sits_near_field_strength() {
    // Continuum Landau levels are (2j+1)·B; on the lattice the lowest
    // cluster center agrees with B up to discretization corrections that
    // stay below 10% at this flux density.
    let cfg = ExperimentConfig {
        model: ModelSpec {
            dimension: 2,
            cells_per_side: vec![12],
            points_per_cell: 1,
            u: PotentialSpec::CosineBump { radius_cells: 0.45 },
            v0: CellPotential::zero(),
            field_b: 2.0 * std::f64::consts::PI / 12.0,
        },
        measure: MeasureSpec::uniform(0.0, 1.0).unwrap(),
        energy_e0: EnergyPolicy::LandauBandCenter { index: 0 },
        epsilons: vec![0.05],
        n_realizations: 8,
        master_seed: 0,
        workers: 0,
    };
    let bx = BoxSpec::new(2, 12, 1).unwrap();
    let band = landau_band(&bx, &cfg, 0).unwrap();
    let b = cfg.model.field_b;
    assert!(
        (band.center - b).abs() <= 0.1 * b,
        "lowest cluster at {} vs B = {b}",
        band.center
    );
    // Second cluster near 3B, with a looser tolerance.
    let band1 = landau_band(&bx, &cfg, 1).unwrap();
    assert!(
        (band1.center - 3.0 * b).abs() <= 0.2 * (3.0 * b),
        "second cluster at {} vs 3B = {}",
        band1.center,
        3.0 * b
    );
}

#[test]
fn landau_degeneracy_flux_count_oracle() {
    // Degeneracy of each isolated cluster equals the number of flux quanta
    // B·L²/2π threading the torus, for several admissible fields.
    for (l, quanta) in [(8usize, 4usize), (12, 12), (10, 5)] {
        let b = 2.0 * std::f64::consts::PI * quanta as f64 / (l * l) as f64;
        let cfg = ExperimentConfig {
            model: ModelSpec {
                dimension: 2,
                cells_per_side: vec![l],
                points_per_cell: 1,
                u: PotentialSpec::CosineBump { radius_cells: 0.45 },
                v0: CellPotential::zero(),
                field_b: b,
            },
            measure: MeasureSpec::uniform(0.0, 1.0).unwrap(),
            energy_e0: EnergyPolicy::LandauBandCenter { index: 0 },
            epsilons: vec![0.05],
            n_realizations: 8,
            master_seed: 0,
            workers: 0,
        };
        let bx = BoxSpec::new(2, l, 1).unwrap();
        let band = landau_band(&bx, &cfg, 0).unwrap();
        assert_eq!(band.flux_quanta, quanta);
        assert_eq!(band.degeneracy, quanta, "L={l}, B·L²/2π={quanta}");
    }
}

#[test]
fn spectrum_gauge_invariant_under_origin_shifts() {
    let bx = BoxSpec::new(2, 6, 1).unwrap();
    let b = 2.0 * std::f64::consts::PI * 2.0 / 36.0;
    let base =
        wegnerlab::operators::build_background_with_gauge(&bx, &CellPotential::zero(), b, (0, 0))
            .unwrap();
    let e0 = eigensolve(&base, false).unwrap().eigenvalues;
    for origin in [(1, 0), (0, 1), (3, 2)] {
        let shifted = wegnerlab::operators::build_background_with_gauge(
            &bx,
            &CellPotential::zero(),
            b,
            origin,
        )
        .unwrap();
        let e1 = eigensolve(&shifted, false).unwrap().eigenvalues;
        let scale = e0.last().copied().unwrap_or(1.0).abs().max(1.0);
        for (a, c) in e0.iter().zip(&e1) {
            assert!(
                (a - c).abs() <= 1e-9 * scale,
                "origin {origin:?}: {a} vs {c}"
            );
        }
    }
}

#[test]
fn ucp_constant_positive_for_landau_projector() {
    // The magnetic analog: the lowest-band projector of the Peierls operator
    // sees the bump potential with a strictly positive constant.
    let bx = BoxSpec::new(2, 8, 1).unwrap();
    let b = 2.0 * std::f64::consts::PI * 4.0 / 64.0;
    let h0 = build_background(&bx, &CellPotential::zero(), b).unwrap();
    let sd0 = eigensolve(&h0, true).unwrap();
    let u = SingleSitePotential::cell_indicator(2, 1);
    let tilde = wegnerlab::operators::assemble_tilde(&bx, &u).unwrap();
    let band_top = sd0.eigenvalues[3]; // four flux quanta in the lowest band
    let interval = wegnerlab::Interval::new(sd0.eigenvalues[0] - 1e-9, band_top + 1e-9).unwrap();
    let c = wegnerlab::spectra::ucp_constant(&sd0, interval, &tilde).unwrap();
    assert!(c > 0.0);
    // With Ṽ = identity the constant is exactly one.
    assert!((c - 1.0).abs() < 1e-9, "cell cover gives PṼP = P, got {c}");

    // A sparser bump still gives a positive constant.
    let mut diag = DVector::zeros(64);
    for site in 0..64 {
        if site % 2 == 0 {
            diag[site] = 1.0;
        }
    }
    let sparse = wegnerlab::LatticeOperator {
        repr: wegnerlab::operators::OperatorRepr::Diagonal(diag),
        box_spec: bx,
        provenance: wegnerlab::operators::Provenance::TildePotential,
    };
    let c_sparse = wegnerlab::spectra::ucp_constant(&sd0, interval, &sparse).unwrap();
    assert!(c_sparse > 0.0, "sparse potential UCP constant {c_sparse}");
}
