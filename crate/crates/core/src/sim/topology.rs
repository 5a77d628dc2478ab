//! Node placement helpers.

/// Position in meters.
pub type Pos = (f64, f64);

pub fn dist(a: Pos, b: Pos) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Straight line along the x-axis: node `i` at `(i * spacing, 0)`. The sink
/// sits at the origin.
pub fn line(n: usize, spacing: f64) -> Vec<Pos> {
    (0..n).map(|i| (i as f64 * spacing, 0.0)).collect()
}

/// Concentric circles around a sink at the origin: ring `r` (1-based) holds
/// `rings[r-1]` nodes evenly spread on a circle of radius `r * spacing`.
/// Rings are rotated against each other so nodes do not line up radially.
pub fn circles(rings: &[u32], spacing: f64) -> Vec<Pos> {
    let mut out = vec![(0.0, 0.0)];
    for (ring, &count) in rings.iter().enumerate() {
        let radius = (ring as f64 + 1.0) * spacing;
        let rotation = 0.35 * (ring as f64 + 1.0);
        for k in 0..count {
            let angle = rotation + f64::from(k) * std::f64::consts::TAU / f64::from(count);
            out.push((radius * angle.cos(), radius * angle.sin()));
        }
    }
    out
}

/// Lay out a rooted tree given per-node parents (`None` marks the root):
/// each depth level is a circle of radius `depth * spacing`, and children
/// fan out around their parent's direction.
pub fn tree_layout(parents: &[Option<usize>], spacing: f64) -> Vec<Pos> {
    let n = parents.len();
    let mut depth = vec![0usize; n];
    for i in 0..n {
        let mut d = 0;
        let mut cur = i;
        while let Some(p) = parents[cur] {
            d += 1;
            cur = p;
            assert!(d <= n, "parent chain has a cycle");
        }
        depth[i] = d;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut root = None;
    for i in 0..n {
        match parents[i] {
            Some(p) => children[p].push(i),
            None => root = Some(i),
        }
    }
    let root = root.expect("tree has no root");

    let mut pos: Vec<Pos> = vec![(0.0, 0.0); n];
    // Breadth-first: spread each node's children over a limited arc around
    // the parent's outward direction.
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(p) = queue.pop_front() {
        let kids = &children[p];
        if kids.is_empty() {
            continue;
        }
        let outward = if p == root {
            0.0
        } else {
            pos[p].1.atan2(pos[p].0)
        };
        let arc = if p == root {
            std::f64::consts::TAU
        } else {
            std::f64::consts::TAU / 3.0
        };
        let m = kids.len() as f64;
        for (k, &c) in kids.iter().enumerate() {
            let frac = (k as f64 + 0.5) / m - 0.5;
            let angle = outward + arc * frac;
            let radius = (depth[c] as f64) * spacing;
            pos[c] = (radius * angle.cos(), radius * angle.sin());
            queue.push_back(c);
        }
    }
    pos
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_spacing_and_origin() {
        let p = line(4, 60.0);
        assert_eq!(p.len(), 4);
        assert_eq!(p[0], (0.0, 0.0));
        assert!((dist(p[1], p[2]) - 60.0).abs() < 1e-9);
        assert!((p[3].0 - 180.0).abs() < 1e-9);
    }

    #[test]
    fn circles_counts_and_radii() {
        let p = circles(&[5, 10, 15], 60.0);
        assert_eq!(p.len(), 31);
        assert_eq!(p[0], (0.0, 0.0));
        for node in &p[1..6] {
            assert!((dist(*node, p[0]) - 60.0).abs() < 1e-9);
        }
        for node in &p[6..16] {
            assert!((dist(*node, p[0]) - 120.0).abs() < 1e-9);
        }
        for node in &p[16..31] {
            assert!((dist(*node, p[0]) - 180.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_children_stay_near_parents() {
        let parents = vec![None, Some(0), Some(0), Some(0), Some(1), Some(1), Some(2)];
        let p = tree_layout(&parents, 50.0);
        for (i, parent) in parents.iter().enumerate() {
            if let Some(parent) = parent {
                let d = dist(p[i], p[*parent]);
                assert!(d < 110.0, "node {i} is {d} m from its parent");
                assert!(d > 10.0, "node {i} sits on its parent");
            }
        }
    }
}
