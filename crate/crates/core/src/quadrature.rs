//! Globally adaptive Gauss-Kronrod (7/15) quadrature, in one dimension and
//! iterated over boxes.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
    /// Equal pieces the interval is cut into before adaptive bisection; more
    /// than one guards against a lucky first error estimate.
    pub initial_pieces: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-10,
            max_subdivisions: 4000,
            initial_pieces: 1,
        }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Default::default()
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod_segment<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest
/// error estimate until the total estimate meets the tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let pieces = tol.initial_pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut segments: Vec<Segment> = (0..pieces)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == pieces { b } else { a + width * (i + 1) as f64 };
            kronrod_segment(&mut f, lo, hi)
        })
        .collect();
    let mut evaluations = 15 * pieces;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if segments.len() >= tol.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "{} subdivisions on [{a}, {b}], error estimate {error:e} for value {value:e}",
                segments.len()
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature(format!("segment [{}, {}] cannot be bisected", s.a, s.b)));
        }
        segments.push(kronrod_segment(&mut f, s.a, mid));
        segments.push(kronrod_segment(&mut f, mid, s.b));
        evaluations += 30;
    }
}

/// Iterated adaptive quadrature over the box `lo × hi`. Inner integrals run at
/// a tighter tolerance than the outer one.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], tol: Tolerance) -> Result<QuadResult> {
    assert_eq!(lo.len(), hi.len());
    let mut point = vec![0.0; lo.len()];
    let mut evaluations = 0usize;
    let mut first_error = None;
    let value = integrate_axis(&f, lo, hi, 0, &mut point, tol, &mut evaluations, &mut first_error)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(QuadResult {
        value: value.value,
        error_estimate: value.error_estimate,
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
fn integrate_axis<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    axis: usize,
    point: &mut Vec<f64>,
    tol: Tolerance,
    evaluations: &mut usize,
    first_error: &mut Option<Error>,
) -> Result<QuadResult> {
    let last = axis + 1 == lo.len();
    let inner_tol = Tolerance {
        abs: tol.abs * 1e-2,
        rel: tol.rel * 1e-2,
        ..tol
    };
    integrate(
        |x| {
            point[axis] = x;
            if last {
                *evaluations += 1;
                f(point)
            } else {
                match integrate_axis(f, lo, hi, axis + 1, point, inner_tol, evaluations, first_error) {
                    Ok(r) => r.value,
                    Err(e) => {
                        first_error.get_or_insert(e);
                        0.0
                    }
                }
            }
        },
        lo[axis],
        hi[axis],
        tol,
    )
}
