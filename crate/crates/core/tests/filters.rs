mod common;

use common::{psd_kernel, random_graph, rng, sorted_eigenvalues};
use csf_core::filters::{
    attr_highpass_from_eigen, attr_highpass_kernel, filter_value, frequency_response, shrinkage_profile,
    spectral_gains, topology_lowpass_kernel, FilterSpec,
};
use csf_core::kernel::{eigendecompose, Kernel};
use csf_core::{Error, Graph};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn g(l: f64, a2: f64, a3: f64) -> f64 {
    a2 * (l + a3) / (a3 + a2 * (l + a3))
}

#[test]
fn attribute_kernel_spectrum_is_the_filter() {
    let mut r = rng(1);
    for _ in 0..50 {
        let n = r.random_range(3..15);
        let k = psd_kernel(&mut r, n);
        let a2 = 10f64.powf(r.random_range(-1.0..2.0));
        let a3 = 10f64.powf(r.random_range(-1.0..1.0));
        let kattr = attr_highpass_kernel(&k, a2, a3).unwrap();
        let lam = sorted_eigenvalues(k.matrix());
        let got = sorted_eigenvalues(kattr.matrix());
        // g is increasing, so sorted spectra correspond.
        for (l, v) in lam.iter().zip(&got) {
            assert!((g(l.max(0.0), a2, a3) - v).abs() <= 1e-8);
        }
        let via_eigen = attr_highpass_from_eigen(&eigendecompose(k.matrix()).unwrap(), a2, a3).unwrap();
        assert!((via_eigen.matrix() - kattr.matrix()).amax() <= 1e-8);
    }
}

#[test]
fn attribute_filter_limits() {
    let lambdas = [0.0, 0.3, 1.0, 4.0, 50.0];
    let all_pass = FilterSpec::Attribute { a2: 1e8, a3: 1.0 };
    for v in shrinkage_profile(&all_pass, &lambdas).unwrap() {
        assert!((v - 1.0).abs() <= 1e-6);
    }
    let flat = FilterSpec::Attribute { a2: 1.0, a3: 1e8 };
    for v in shrinkage_profile(&flat, &lambdas).unwrap() {
        assert!((v - 0.5).abs() <= 1e-6);
    }
    let k = Kernel::identity(2);
    let kattr = attr_highpass_kernel(&k, 1.0, 1.0).unwrap();
    assert!((kattr.matrix() - DMatrix::identity(2, 2) * (2.0 / 3.0)).amax() < 1e-15);
    assert!(matches!(attr_highpass_kernel(&k, 0.0, 1.0), Err(Error::Parameter(_))));
    assert!(matches!(attr_highpass_kernel(&k, 1.0, -1.0), Err(Error::Parameter(_))));
}

#[test]
fn closed_form_filters() {
    let gcn = FilterSpec::Gcn { avg_degree: 3.0 };
    let profile = shrinkage_profile(&gcn, &[0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
    let steps: Vec<f64> = profile.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|s| (s - steps[0]).abs() < 1e-12 && *s < 0.0));
    let sgc = FilterSpec::Sgc { power: 0 };
    assert!(shrinkage_profile(&sgc, &[0.0, 1.0, 2.0])
        .unwrap()
        .iter()
        .all(|&v| v == 1.0));
    assert!(matches!(filter_value(&gcn, 2.5), Err(Error::Domain { .. })));
    let parsed: FilterSpec = "lp:a1=1".parse().unwrap();
    assert_eq!(filter_value(&parsed, 1.0).unwrap(), 0.5);
    assert!("nonsense".parse::<FilterSpec>().is_err());

    // GCN filter equals 1/r(λ) for r(λ) = (p̄+1)/(p̄(1−λ)+1).
    for p in [0.5, 1.0, 4.0] {
        let spec = FilterSpec::Gcn { avg_degree: p };
        for i in 0..=20 {
            let l = i as f64 * 0.1;
            let denom = p * (1.0 - l) + 1.0;
            if denom.abs() > 1e-9 {
                let r = (p + 1.0) / denom;
                assert!((filter_value(&spec, l).unwrap() - 1.0 / r).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn frequency_responses() {
    let pair = Graph::new(2, [(0, 1)], DMatrix::identity(2, 2)).unwrap();
    let top = topology_lowpass_kernel(&pair);
    assert!((top.matrix() - DMatrix::from_element(2, 2, 0.5)).amax() < 1e-15);
    let signal = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
    assert!(frequency_response(&top, &signal).unwrap().amax() < 1e-15);
    assert_eq!(frequency_response(&Kernel::identity(2), &signal).unwrap(), signal);
    let edgeless = Graph::new(3, [], DMatrix::identity(3, 3)).unwrap();
    assert_eq!(topology_lowpass_kernel(&edgeless).matrix(), &DMatrix::identity(3, 3));
    assert!(frequency_response(&top, &DMatrix::zeros(3, 1)).is_err());
}

#[test]
fn attribute_kernel_favours_high_frequencies_of_its_own_basis() {
    let mut r = rng(6);
    let k = psd_kernel(&mut r, 10);
    let kattr = attr_highpass_kernel(&k, 1.0, 1.0).unwrap();
    // Eigenvectors of K ordered by eigenvalue: the filter's gain must grow.
    let basis = eigendecompose(k.matrix()).unwrap();
    let gains = spectral_gains(&kattr, &basis).unwrap();
    assert!(gains.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    assert!(gains[0] < gains[9]);
}

#[test]
fn topology_kernel_spectrum_on_connected_graphs() {
    let mut r = rng(14);
    for _ in 0..10 {
        let g = random_graph(&mut r, 12, 0.4, 2);
        let ev = sorted_eigenvalues(topology_lowpass_kernel(&g).matrix());
        assert!(ev[0] > -1.0 + 1e-8);
        assert!(ev[11] <= 1.0 + 1e-12);
    }
}

proptest! {
    #[test]
    fn attribute_filter_is_increasing_and_bounded(
        a2 in 1e-3f64..1e3,
        a3 in 1e-3f64..1e3,
        l1 in 0.0f64..100.0,
        gap in 1e-6f64..10.0,
    ) {
        let spec = FilterSpec::Attribute { a2, a3 };
        let lo = filter_value(&spec, l1).unwrap();
        let hi = filter_value(&spec, l1 + gap).unwrap();
        prop_assert!(lo > 0.0 && hi < 1.0);
        prop_assert!(hi > lo, "{lo} !< {hi}");
    }

    #[test]
    fn low_pass_filters_are_nonincreasing(p in 0.0f64..10.0, a1 in 0.0f64..10.0, l in 0.0f64..1.9) {
        for spec in [FilterSpec::Gcn { avg_degree: p }, FilterSpec::LabelPropagation { a1 }] {
            prop_assert!(filter_value(&spec, l + 0.1).unwrap() <= filter_value(&spec, l).unwrap());
        }
    }
}
