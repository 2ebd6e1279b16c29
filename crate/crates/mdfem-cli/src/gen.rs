//! Random interface generators on the unit square. Deterministic per seed.

use std::f64::consts::PI;

use mdfem::Segment2D;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Clip the line p + t*d to the unit square; returns the parameter range.
fn clip_to_square(p: (f64, f64), d: (f64, f64)) -> Option<(f64, f64)> {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for (p0, d0) in [(p.0, d.0), (p.1, d.1)] {
        if d0.abs() < 1e-15 {
            if p0 < 0.0 || p0 > 1.0 {
                return None;
            }
        } else {
            let (t0, t1) = ((0.0 - p0) / d0, (1.0 - p0) / d0);
            tmin = tmin.max(t0.min(t1));
            tmax = tmax.min(t0.max(t1));
        }
    }
    (tmax > tmin).then_some((tmin, tmax))
}

/// Chords through the whole domain: a uniform interior point and a uniform
/// direction, extended to the boundary on both sides.
pub fn gen_infinite_chords(count: usize, seed: u64) -> Vec<Segment2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = (rng.gen::<f64>(), rng.gen::<f64>());
        let theta = rng.gen::<f64>() * PI;
        let d = (theta.cos(), theta.sin());
        let Some((t0, t1)) = clip_to_square(p, d) else { continue };
        if t1 - t0 < 1e-3 {
            continue;
        }
        out.push(Segment2D::new(
            p.0 + t0 * d.0,
            p.1 + t0 * d.1,
            p.0 + t1 * d.0,
            p.1 + t1 * d.1,
        ));
    }
    out
}

/// Finite segments: uniform center, direction and length in (0, max_length],
/// clipped to the square.
pub fn gen_finite_segments(count: usize, max_length: f64, seed: u64) -> Vec<Segment2D> {
    assert!(max_length > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = (rng.gen::<f64>(), rng.gen::<f64>());
        let theta = rng.gen::<f64>() * PI;
        let d = (theta.cos(), theta.sin());
        let len = rng.gen::<f64>() * max_length;
        let Some((t0, t1)) = clip_to_square(c, d) else { continue };
        let (a, b) = ((-len / 2.0).max(t0), (len / 2.0).min(t1));
        if b - a < 1e-3 {
            continue;
        }
        out.push(Segment2D::new(
            c.0 + a * d.0,
            c.1 + a * d.1,
            c.0 + b * d.0,
            c.1 + b * d.1,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_boundary(x: f64, y: f64) -> bool {
        let near = |v: f64, t: f64| (v - t).abs() < 1e-12;
        (near(x, 0.0) || near(x, 1.0) || near(y, 0.0) || near(y, 1.0))
            && (-1e-12..=1.0 + 1e-12).contains(&x)
            && (-1e-12..=1.0 + 1e-12).contains(&y)
    }

    #[test]
    fn chords_touch_boundary_on_both_ends() {
        for seg in gen_infinite_chords(8, 42) {
            assert!(on_boundary(seg.a.x, seg.a.y), "{:?}", seg);
            assert!(on_boundary(seg.b.x, seg.b.y), "{:?}", seg);
        }
    }

    #[test]
    fn finite_segments_stay_inside_with_bounded_length() {
        for seg in gen_finite_segments(200, 0.2, 7) {
            assert!(seg.length() <= 0.2 + 1e-12);
            for p in [seg.a, seg.b] {
                assert!((-1e-12..=1.0 + 1e-12).contains(&p.x));
                assert!((-1e-12..=1.0 + 1e-12).contains(&p.y));
            }
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        assert_eq!(
            format!("{:?}", gen_infinite_chords(50, 3)),
            format!("{:?}", gen_infinite_chords(50, 3))
        );
        assert_eq!(
            format!("{:?}", gen_finite_segments(50, 0.2, 3)),
            format!("{:?}", gen_finite_segments(50, 0.2, 3))
        );
        assert_ne!(
            format!("{:?}", gen_infinite_chords(5, 3)),
            format!("{:?}", gen_infinite_chords(5, 4))
        );
    }
}
