#![allow(dead_code)]

use power_districts::{Block, Instance, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

/// State-like synthetic instance: `n` blocks whose populations sum to exactly
/// `m`, clustered around a few towns over a rural background. Coordinates are
/// planar meters over a `width` x `height` box.
pub fn synthetic(n: usize, m: u64, k: usize, towns: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (500_000.0, 330_000.0);
    let centres: Vec<(Point2, f64)> = (0..towns)
        .map(|_| {
            let c = Point2::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height));
            (c, rng.gen_range(3_000.0..25_000.0))
        })
        .collect();
    let sizes = LogNormal::new(0.0, 1.0).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut locations = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let p = if towns > 0 && rng.gen_bool(0.7) {
            let (c, sigma) = centres[rng.gen_range(0..towns)];
            Point2::new(
                c.x + sigma * unit.sample(&mut rng),
                c.y + sigma * unit.sample(&mut rng),
            )
        } else {
            Point2::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height))
        };
        locations.push(p);
        raw.push(sizes.sample(&mut rng));
    }
    let pops = apportion(&raw, m);
    let blocks = locations
        .into_iter()
        .zip(pops)
        .enumerate()
        .map(|(i, (p, pop))| Block::new(format!("b{i}"), p, pop))
        .collect();
    Instance::new(blocks, k).unwrap()
}

/// Integer populations proportional to `raw` summing to exactly `m`.
pub fn apportion(raw: &[f64], m: u64) -> Vec<u64> {
    let total: f64 = raw.iter().sum();
    let mut pops: Vec<u64> = raw.iter().map(|r| (r / total * m as f64).floor() as u64).collect();
    let assigned: u64 = pops.iter().sum();
    let short = m - assigned;
    let n = pops.len() as u64;
    for (i, p) in pops.iter_mut().enumerate() {
        *p += short / n + u64::from((i as u64) < short % n);
    }
    pops
}

/// Small random instance with `m` persons spread over at most `max_blocks`
/// blocks with integer coordinates in `0..range`.
pub fn small_random(rng: &mut ChaCha8Rng, m: u64, max_blocks: usize, k: usize, range: i32) -> Instance {
    let n = rng.gen_range(1..=max_blocks);
    let mut pops = vec![0u64; n];
    for _ in 0..m {
        pops[rng.gen_range(0..n)] += 1;
    }
    let blocks = pops
        .into_iter()
        .enumerate()
        .map(|(i, pop)| {
            let p = Point2::new(rng.gen_range(0..range) as f64, rng.gen_range(0..range) as f64);
            Block::new(format!("b{i}"), p, pop)
        })
        .collect();
    Instance::new(blocks, k).unwrap()
}

/// Two Gaussian clusters of `n / 2` unit-population blocks each.
pub fn two_gaussians(n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let blocks = (0..n)
        .map(|i| {
            let cx = if i < n / 2 { -5.0 } else { 5.0 };
            let p = Point2::new(cx + unit.sample(&mut rng), unit.sample(&mut rng));
            Block::new(format!("g{i}"), p, 1)
        })
        .collect();
    Instance::new(blocks, 2).unwrap()
}

/// Writes a planar blocks CSV.
pub fn write_csv(path: &std::path::Path, inst: &Instance) {
    let mut s = String::from("block_id,x,y,population\n");
    for b in inst.blocks() {
        s.push_str(&format!("{},{},{},{}\n", b.id, b.location.x, b.location.y, b.population));
    }
    std::fs::write(path, s).unwrap();
}

/// The adversarial hexagon: three centers A, B, C and three unit residents
/// X, Y, Z on alternate corners of a unit hexagon (A, X, C, Z, B, Y in
/// order), with the residents nudged so the pairing (A,X), (B,Y), (C,Z) has
/// sides about `1 - eps` and the pairing (A,Y), (B,Z), (C,X) has sides about
/// `1 + eps`. Coordinates are dyadic so squared distances are exact.
pub struct Hexagon {
    pub instance: Instance,
    pub centers: Vec<Point2>,
    /// Center of X, Y, Z under the optimal matching (centers are A, B, C).
    pub optimal: [usize; 3],
    /// Center of X, Y, Z under the trap matching.
    pub trap: [usize; 3],
}

pub fn hexagon(eps: f64) -> Hexagon {
    let corner = |t: f64| {
        let a = t * std::f64::consts::FRAC_PI_3;
        Point2::new(a.cos(), a.sin())
    };
    let dyadic = |p: Point2| {
        let s = (1u64 << 20) as f64;
        Point2::new((p.x * s).round() / s, (p.y * s).round() / s)
    };
    let rotate = |p: Point2, t: f64| {
        let (s, c) = (t * std::f64::consts::FRAC_PI_3).sin_cos();
        Point2::new(c * p.x - s * p.y, s * p.x + c * p.y)
    };
    let (a, c, b) = (corner(0.0), corner(2.0), corner(4.0));
    // Push X along the unit vector from C towards A; the two sides change by
    // about +-eps.
    let dir = a - c;
    let len = dir.norm_squared().sqrt();
    let shift = eps / (3f64.sqrt() / 2.0);
    let x = corner(1.0) + dir * (shift / len);
    // Rotating by 120 degrees maps A->C->B and X->Z->Y.
    let z = rotate(x, 2.0);
    let y = rotate(x, 4.0);
    let residents = [dyadic(x), dyadic(y), dyadic(z)];
    let blocks = ["X", "Y", "Z"]
        .iter()
        .zip(residents)
        .map(|(id, p)| Block::new(*id, p, 1))
        .collect();
    Hexagon {
        instance: Instance::new(blocks, 3).unwrap(),
        centers: vec![dyadic(a), dyadic(b), dyadic(c)],
        // X-A, Y-B, Z-C
        optimal: [0, 1, 2],
        // X-C, Y-A, Z-B
        trap: [2, 0, 1],
    }
}
