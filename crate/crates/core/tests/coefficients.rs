use std::f64::consts::PI;

use heatlab::coefficients::{c0k, cnk_lattice, CoefficientEngine};
use heatlab::spectral::dirichlet_form;
use heatlab::{Component, GaussianMixturePotential, SpectralGrid};

/// `p(x) e^{-c x²}` with polynomial coefficients in ascending order.
#[derive(Clone, Debug)]
struct PolyGauss {
    p: Vec<f64>,
    c: f64,
}

impl PolyGauss {
    fn gaussian(c: f64) -> Self {
        PolyGauss { p: vec![1.0], c }
    }

    fn derivative(&self) -> Self {
        let mut out = vec![0.0; self.p.len() + 1];
        for (j, &a) in self.p.iter().enumerate() {
            if j > 0 {
                out[j - 1] += j as f64 * a;
            }
            out[j + 1] -= 2.0 * self.c * a;
        }
        PolyGauss { p: out, c: self.c }
    }

    fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |f, _| f.derivative())
    }

    fn times(&self, o: &Self) -> Self {
        let mut out = vec![0.0; self.p.len() + o.p.len() - 1];
        for (i, a) in self.p.iter().enumerate() {
            for (j, b) in o.p.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyGauss { p: out, c: self.c + o.c }
    }

    fn scale(&self, s: f64) -> Self {
        PolyGauss {
            p: self.p.iter().map(|a| a * s).collect(),
            c: self.c,
        }
    }

    /// `∫ x^{2j} e^{-c x²} dx = Γ(j + 1/2) / c^{j + 1/2}`.
    fn integral(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .filter(|(j, _)| j % 2 == 0)
            .map(|(j, a)| {
                let h = j as f64 / 2.0 + 0.5;
                a * libm::tgamma(h) / self.c.powf(h)
            })
            .sum()
    }
}

/// Symbolic values for `V = e^{-x²}` at `α = 2`, where `F = −d²/dx²`.
struct Symbolic {
    c4: f64,
    c5: f64,
    c12: f64,
    c22: f64,
    c32: f64,
    c13: f64,
    c23: f64,
    c14: f64,
}

fn symbolic_unit_gaussian() -> Symbolic {
    let v = PolyGauss::gaussian(1.0);
    let fv = v.nth_derivative(2).scale(-1.0);
    let f2v = v.nth_derivative(4);
    let v2 = v.times(&v);
    let v3 = v2.times(&v);
    let int_pow = |k: f64| (PI / k).sqrt();
    let e_v = v.derivative().times(&v.derivative()).integral();
    let e_fv = fv.derivative().times(&fv.derivative()).integral();
    let e_v2 = v2.derivative().times(&v2.derivative()).integral();
    let v2_fv = v2.times(&fv).integral();
    let fv_sq = fv.times(&fv).integral();
    let v3_fv = v3.times(&fv).integral();
    let v2_f2v = v2.times(&f2v).integral();
    let v_fv_sq = v.times(&fv).times(&fv).integral();
    Symbolic {
        c4: (int_pow(4.0) + 2.0 * v2_fv + fv_sq) / 24.0,
        c5: (int_pow(5.0) + 2.0 * v3_fv + 2.0 * v2_f2v + v_fv_sq + e_fv + e_v2) / 120.0,
        c12: e_v / 6.0,
        c22: fv_sq / 12.0,
        c32: e_fv / 20.0,
        c13: v2_fv / 12.0,
        c23: (2.0 * v_fv_sq + 4.0 * v2_f2v) / 120.0,
        c14: (2.0 * v3_fv + e_v2) / 120.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn grid1() -> SpectralGrid {
    SpectralGrid::new(1, 256, 16.0).unwrap()
}

fn mixtures() -> Vec<GaussianMixturePotential> {
    vec![
        GaussianMixturePotential::unit_gaussian(1),
        GaussianMixturePotential::new(1, vec![Component::new(1.0, vec![0.0], 1.0), Component::new(0.5, vec![1.5], 2.0)]).unwrap(),
        GaussianMixturePotential::new(
            1,
            vec![
                Component::new(0.8, vec![-1.0], 0.5),
                Component::new(-0.6, vec![1.0], 1.5),
                Component::new(0.3, vec![0.2], 3.0),
            ],
        )
        .unwrap(),
    ]
}

#[test]
fn analytic_anchors_for_unit_gaussian() {
    let v = GaussianMixturePotential::unit_gaussian(1);
    let e = CoefficientEngine::new(&v, &grid1(), 2.0).unwrap();
    assert!((dirichlet_form(&v, &grid1(), 2.0).unwrap() - (PI / 2.0).sqrt()).abs() <= 1e-6);
    assert!((e.c_ell(1).unwrap() - PI.sqrt()).abs() <= 1e-10);
    assert!((e.c_ell(2).unwrap() - 0.5 * (PI / 2.0).sqrt()).abs() <= 1e-10);
    let c3 = ((PI / 3.0).sqrt() + (PI / 2.0).sqrt()) / 6.0;
    assert!((e.c_ell(3).unwrap() - c3).abs() <= 1e-6);
}

#[test]
fn closed_forms_match_symbolic_oracle() {
    let s = symbolic_unit_gaussian();
    let e = CoefficientEngine::new(&GaussianMixturePotential::unit_gaussian(1), &grid1(), 2.0).unwrap();
    let cases = [
        ("C_4 closed", e.c4_closed(), s.c4),
        ("C_4 sos", e.c4_sos(), s.c4),
        ("C_5 closed", e.c5_closed(), s.c5),
        ("C_5 sos", e.c5_sos(), s.c5),
        ("C_{1,2}", e.cnk_closed(1, 2).unwrap(), s.c12),
        ("C_{2,2}", e.cnk_closed(2, 2).unwrap(), s.c22),
        ("C_{3,2}", e.cnk_closed(3, 2).unwrap(), s.c32),
        ("C_{1,3}", e.cnk_closed(1, 3).unwrap(), s.c13),
        ("C_{2,3}", e.cnk_closed(2, 3).unwrap(), s.c23),
        ("C_{1,4}", e.cnk_closed(1, 4).unwrap(), s.c14),
        ("C_{1,2} lattice", e.cnk_fourier(1, 2).unwrap(), s.c12),
        ("C_{2,2} lattice", e.cnk_fourier(2, 2).unwrap(), s.c22),
        ("C_{3,2} lattice", e.cnk_fourier(3, 2).unwrap(), s.c32),
        ("C_{1,3} lattice", e.cnk_fourier(1, 3).unwrap(), s.c13),
        ("C_{2,3} lattice", e.cnk_fourier(2, 3).unwrap(), s.c23),
    ];
    for (name, got, want) in cases {
        assert!(rel(got, want) <= 1e-6, "{name}: {got} vs {want}");
    }
}

#[test]
fn lattice_and_closed_routes_agree() {
    for v in mixtures() {
        for alpha in [0.8, 1.0, 1.5, 2.0] {
            let e = CoefficientEngine::new(&v, &grid1(), alpha).unwrap();
            for (n, k) in [(1, 2), (2, 2), (3, 2), (1, 3), (2, 3)] {
                let closed = e.cnk_closed(n, k).unwrap();
                let lattice = e.cnk_fourier(n, k).unwrap();
                assert!(rel(lattice, closed) <= 1e-5, "alpha {alpha} C_{{{n},{k}}}: {lattice} vs {closed}");
            }
            assert!((e.c4_closed() - e.c4_sos()).abs() <= 1e-8);
            for ell in 3..=5 {
                let d = e.c_ell_decomposed(ell).unwrap();
                assert!(rel(d, e.c_ell(ell).unwrap()) <= 1e-5, "alpha {alpha} C_{ell}");
            }
        }
    }
}

#[test]
fn c5_sum_of_squares_for_nonnegative_mixtures() {
    for v in mixtures().into_iter().take(2) {
        for alpha in [1.0, 1.5, 2.0] {
            let e = CoefficientEngine::new(&v, &grid1(), alpha).unwrap();
            assert!((e.c5_closed() - e.c5_sos()).abs() <= 1e-7);
        }
    }
}

/// `(2π)^{-1} ∫ |V̂|² |ξ|^s dξ` for `V = e^{-x²}`, `V̂ = √π e^{-ξ²/4}`.
fn gaussian_moment(s: f64) -> f64 {
    2f64.powf((s - 1.0) / 2.0) * libm::tgamma((s + 1.0) / 2.0)
}

#[test]
fn fractional_dirichlet_form_against_gamma_oracle() {
    let v = GaussianMixturePotential::unit_gaussian(1);
    // The |ξ|^α cusp at the origin limits the lattice to O((π/L)^{1+α}).
    for (alpha, tol) in [(0.8, 1e-2), (1.0, 5e-3), (1.5, 5e-4), (2.0, 1e-12)] {
        let got = dirichlet_form(&v, &grid1(), alpha).unwrap();
        assert!(rel(got, gaussian_moment(alpha)) <= tol, "alpha {alpha}: {got}");
    }
    let wide = SpectralGrid::new(1, 16384, 1024.0).unwrap();
    for alpha in [0.8, 1.0, 1.5] {
        let got = dirichlet_form(&v, &wide, alpha).unwrap();
        assert!(rel(got, gaussian_moment(alpha)) <= 1e-5, "alpha {alpha} wide: {got}");
    }
}

#[test]
fn single_frequency_integrals_for_any_alpha() {
    let v = GaussianMixturePotential::unit_gaussian(1);
    let wide = SpectralGrid::new(1, 16384, 1024.0).unwrap();
    let weights = [1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0];
    for alpha in [1.0, 1.5] {
        for n in 1..=3u32 {
            let got = cnk_lattice(&v, &wide, alpha, n, 2).unwrap();
            let want = weights[n as usize - 1] * gaussian_moment(alpha * n as f64);
            assert!(rel(got, want) <= 1e-5, "alpha {alpha} n {n}: {got} vs {want}");
        }
    }
}

#[test]
fn c0k_matches_gaussian_powers() {
    let v = GaussianMixturePotential::single(1.3, vec![0.4], 0.7).unwrap();
    let mut fact = 1.0;
    for k in 2..=7u32 {
        fact *= k as f64;
        let want = 1.3f64.powi(k as i32) * (PI / (0.7 * k as f64)).sqrt() / fact;
        assert!(rel(c0k(&v, k).unwrap(), want) <= 1e-14);
    }
}

#[test]
fn second_dyson_term_derivative_at_zero() {
    let v = GaussianMixturePotential::unit_gaussian(1);
    let e = CoefficientEngine::new(&v, &grid1(), 2.0).unwrap();
    let t = 1e-3;
    let fd = (e.t2_exact(0.0).unwrap() - e.t2_exact(t).unwrap()) / t;
    let c12 = e.cnk_fourier(1, 2).unwrap();
    assert!(rel(fd, c12) <= 1e-3, "{fd} vs {c12}");
}

#[test]
fn refining_the_grid_at_fixed_box_changes_nothing() {
    for v in mixtures() {
        for alpha in [0.8, 2.0] {
            let coarse = CoefficientEngine::new(&v, &SpectralGrid::new(1, 256, 16.0).unwrap(), alpha).unwrap();
            let fine = CoefficientEngine::new(&v, &SpectralGrid::new(1, 512, 16.0).unwrap(), alpha).unwrap();
            for ell in 1..=5 {
                let (a, b) = (coarse.c_ell(ell).unwrap(), fine.c_ell(ell).unwrap());
                assert!(rel(a, b) <= 1e-6, "alpha {alpha} C_{ell}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn single_gaussian_coefficients_are_strictly_positive() {
    for alpha in [0.8, 1.0, 1.5, 2.0] {
        for sign in [1.0, -1.0] {
            let v = GaussianMixturePotential::single(sign * 0.9, vec![0.3], 1.7).unwrap();
            let e = CoefficientEngine::new(&v, &grid1(), alpha).unwrap();
            for ell in [2, 4] {
                assert!(e.c_ell(ell).unwrap() > 1e-12);
            }
            if sign > 0.0 {
                for ell in 2..=5 {
                    assert!(e.c_ell(ell).unwrap() > 1e-12, "alpha {alpha} C_{ell}");
                }
            }
        }
    }
}

#[test]
fn two_dimensional_anchors() {
    let v = GaussianMixturePotential::unit_gaussian(2);
    let g = SpectralGrid::default_for(2).unwrap();
    // ∫|∇e^{-|x|²}|² = d (π/2)^{d/2}
    assert!(rel(dirichlet_form(&v, &g, 2.0).unwrap(), PI) <= 1e-8);
    let e = CoefficientEngine::new(&v, &g, 1.5).unwrap();
    assert!(rel(e.cnk_fourier(1, 2).unwrap(), e.cnk_closed(1, 2).unwrap()) <= 1e-5);
    assert!(rel(e.cnk_fourier(2, 2).unwrap(), e.cnk_closed(2, 2).unwrap()) <= 1e-5);
    assert!(e.cnk_fourier(1, 3).is_err());
    assert!((e.c4_closed() - e.c4_sos()).abs() <= 1e-8);
}

#[test]
fn three_dimensional_closed_forms_run() {
    let v = GaussianMixturePotential::unit_gaussian(3);
    let e = CoefficientEngine::new(&v, &SpectralGrid::default_for(3).unwrap(), 2.0).unwrap();
    assert!(rel(e.dirichlet_form(), 3.0 * (PI / 2.0).powf(1.5)) <= 1e-8);
    assert!((e.c4_closed() - e.c4_sos()).abs() <= 1e-8);
    assert!((e.c5_closed() - e.c5_sos()).abs() <= 1e-7);
}
