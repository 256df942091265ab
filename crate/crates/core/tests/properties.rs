use std::sync::Arc;

use gevrey_core::brownian::{increments, refine};
use gevrey_core::nonlinear::{convect, transport, TransportField};
use gevrey_core::random::{random_field, FieldKind};
use gevrey_core::{GevreyWeight, PathSpec, SpectralField, WaveLattice};
use proptest::prelude::*;

fn lattice(dim: usize, n: usize) -> Arc<WaveLattice> {
    Arc::new(WaveLattice::new(dim, n).unwrap())
}

fn field(lat: &Arc<WaveLattice>, kind: FieldKind, seed: u64, decay: f64) -> SpectralField {
    random_field(lat, kind, seed, move |k| k.powf(-decay))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leray_is_idempotent_and_solenoidal(seed in any::<u64>(), dim in 2usize..=3, decay in 0.5f64..3.0) {
        let lat = lattice(dim, 8);
        let f = field(&lat, FieldKind::General, seed, decay);
        let p = f.leray_project();
        let twice = p.leray_project();
        prop_assert!(twice.sub(&p).unwrap().l2_norm() <= 1e-13 * f.l2_norm());
        prop_assert!(p.validate_physical().max_residual() <= 1e-13 * f.l2_norm());
        prop_assert!(p.l2_norm() <= f.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn parseval_holds(seed in any::<u64>(), decay in 0.5f64..3.0) {
        let lat = lattice(2, 16);
        let u = field(&lat, FieldKind::Solenoidal, seed, decay);
        prop_assert!(close(u.physical_energy(), u.sobolev_norm_sq(0.0), 1e-12));
        let back = SpectralField::from_physical(&lat, &u.to_physical()).unwrap();
        prop_assert!(back.sub(&u).unwrap().l2_norm() <= 1e-13 * u.l2_norm());
    }

    #[test]
    fn mode_trading_inequalities(seed in any::<u64>(), cutoff in 1usize..6, r in 0.0f64..2.0, gap in 0.0f64..2.0) {
        let lat = lattice(2, 16);
        let f = field(&lat, FieldKind::General, seed, 1.2);
        let s = r + gap;
        let n2 = (cutoff as f64).powf(2.0 * gap);
        let low = f.galerkin_project(cutoff);
        let high = f.galerkin_complement(cutoff);
        prop_assert!(low.sobolev_norm_sq(s) <= n2 * low.sobolev_norm_sq(r) * (1.0 + 1e-12));
        prop_assert!(high.sobolev_norm_sq(r) * n2 <= high.sobolev_norm_sq(s) * (1.0 + 1e-12));
        prop_assert!(low.sobolev_norm_sq(r) <= f.sobolev_norm_sq(r) * (1.0 + 1e-14));
        prop_assert!(high.sobolev_norm_sq(r) <= f.sobolev_norm_sq(r) * (1.0 + 1e-14));
        prop_assert!(low.inner(&high).unwrap().abs() <= 1e-14 * f.sobolev_norm_sq(0.0));
    }

    #[test]
    fn nested_projection_pythagoras(seed in any::<u64>(), small in 1usize..4, extra in 0usize..3) {
        let lat = lattice(2, 16);
        let big = small + extra;
        let f = field(&lat, FieldKind::Solenoidal, seed, 1.0);
        let g = field(&lat, FieldKind::Solenoidal, seed ^ 0x55, 1.5);
        let lhs = f.galerkin_project(big).sub(&g.galerkin_project(small)).unwrap().sobolev_norm_sq(1.0);
        let band = f.galerkin_project(big).sub(&f.galerkin_project(small)).unwrap().sobolev_norm_sq(1.0);
        let inner = f.sub(&g).unwrap().galerkin_project(small).sobolev_norm_sq(1.0);
        prop_assert!(close(lhs, band + inner, 1e-12));
    }

    #[test]
    fn convection_conserves_energy(seed in any::<u64>(), decay in 1.0f64..3.0) {
        let lat = lattice(2, 32);
        let ext = lat.dealias_extent() / 2;
        let u = field(&lat, FieldKind::Solenoidal, seed, decay).galerkin_project(ext);
        let v = field(&lat, FieldKind::Solenoidal, seed.wrapping_add(1), decay).galerkin_project(ext);
        let b = convect(&u, &v).unwrap();
        let scale = u.l2_norm() * v.sobolev_norm(1.0) * v.l2_norm();
        prop_assert!(b.inner(&v).unwrap().abs() <= 1e-12 * scale);
    }

    #[test]
    fn constant_transport_is_skew(seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0, phi in 0.0f64..0.4) {
        let lat = lattice(2, 16);
        let u = field(&lat, FieldKind::Solenoidal, seed, 1.5);
        let xi = TransportField::Constant(vec![a, b]);
        let tu = transport(&xi, &u).unwrap();
        let w = GevreyWeight::new(1.0, 1.0, phi);
        let ip = tu.gevrey_inner(&u, &w).unwrap();
        prop_assert!(ip.abs() <= 1e-12 * u.gevrey_sobolev_norm_sq(&w).unwrap().max(1e-300));
    }

    #[test]
    fn bridge_refinement_preserves_sums(seed in any::<u64>(), path in 0u64..1000, factor in 2usize..9, n_steps in 1usize..20) {
        let spec = PathSpec::new(seed, path, 2);
        let coarse = increments(&spec, 3, 0.01, n_steps).unwrap();
        let fine = refine(&coarse, factor).unwrap();
        prop_assert_eq!(fine.n_steps, n_steps * factor);
        for k in 0..2 {
            let col = fine.column(k);
            for (s, chunk) in col.chunks(factor).enumerate() {
                let want = coarse.row(s)[k];
                prop_assert!((chunk.iter().sum::<f64>() - want).abs() <= 1e-14 * (1.0 + want.abs()));
            }
        }
        let again = refine(&coarse, factor).unwrap();
        prop_assert_eq!(again.increments, fine.increments);
    }

    #[test]
    fn increments_are_reproducible_per_step(seed in any::<u64>(), first in 0u64..50, len in 1usize..30) {
        let spec = PathSpec::new(seed, 1, 3);
        let whole = increments(&spec, 0, 0.02, first as usize + len).unwrap();
        let tail = increments(&spec, first, 0.02, len).unwrap();
        prop_assert_eq!(&whole.increments[first as usize * 3..], &tail.increments[..]);
    }
}
