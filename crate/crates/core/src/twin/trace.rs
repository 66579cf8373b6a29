//! Supercover traversal between cell centers.

use crate::sitemap::{Coord, SiteMap};

/// Visits every cell touched by the closed segment joining the centers of
/// `a` and `b`, in order from `a`. Where the segment passes exactly through
/// a grid corner both side cells are visited before the diagonal cell.
/// The visitor returns `false` to stop early.
pub fn supercover(a: Coord, b: Coord, mut visit: impl FnMut(Coord) -> bool) {
    let (x0, y0) = (a.j as i64, a.i as i64);
    let (x1, y1) = (b.j as i64, b.i as i64);
    let (dx, dy) = ((x1 - x0).abs(), (y1 - y0).abs());
    let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
    let at = |x: i64, y: i64| Coord::new(y as usize, x as usize);
    let (mut x, mut y) = (x0, y0);
    if !visit(at(x, y)) {
        return;
    }
    let (mut ix, mut iy) = (0i64, 0i64);
    while ix < dx || iy < dy {
        // sign of (next x-boundary crossing) - (next y-boundary crossing)
        let decision = (1 + 2 * ix) * dy - (1 + 2 * iy) * dx;
        if decision == 0 {
            if !visit(at(x + sx, y)) || !visit(at(x, y + sy)) {
                return;
            }
            x += sx;
            y += sy;
            ix += 1;
            iy += 1;
        } else if decision < 0 {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        if !visit(at(x, y)) {
            return;
        }
    }
}

/// Number of building cells crossed between `a` and `b`, endpoints' own
/// cells excluded. Endpoints are put in canonical order first, so the
/// count is symmetric.
pub fn trace_walls(map: &SiteMap, a: Coord, b: Coord) -> usize {
    count_walls(map, a, b, usize::MAX)
}

/// As [`trace_walls`] but stops once `limit` walls have been seen.
pub(crate) fn count_walls(map: &SiteMap, a: Coord, b: Coord, limit: usize) -> usize {
    assert!(map.in_bounds(a) && map.in_bounds(b), "trace endpoints out of bounds");
    if limit == 0 {
        return 0;
    }
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let occupancy = map.occupancy();
    let width = map.width();
    let mut walls = 0;
    supercover(a, b, |c| {
        if c != a && c != b && occupancy[c.i * width + c.j] {
            walls += 1;
        }
        walls < limit
    });
    walls
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(a: Coord, b: Coord) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        supercover(a, b, |c| {
            out.push((c.i, c.j));
            true
        });
        out
    }

    #[test]
    fn horizontal_and_vertical() {
        assert_eq!(cells(Coord::new(2, 0), Coord::new(2, 3)), vec![(2, 0), (2, 1), (2, 2), (2, 3)]);
        assert_eq!(cells(Coord::new(3, 1), Coord::new(0, 1)), vec![(3, 1), (2, 1), (1, 1), (0, 1)]);
        assert_eq!(cells(Coord::new(4, 4), Coord::new(4, 4)), vec![(4, 4)]);
    }

    #[test]
    fn diagonal_includes_corner_neighbours() {
        assert_eq!(
            cells(Coord::new(0, 0), Coord::new(2, 2)),
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn shallow_line() {
        // center (0,0) to (1,3): y crosses 0.5 at x = 1.5, exactly on a corner
        assert_eq!(cells(Coord::new(0, 0), Coord::new(1, 3)), vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (1, 3)]);
    }

    #[test]
    fn wall_examples() {
        let empty = SiteMap::open(8, 8, 1.0).unwrap();
        assert_eq!(trace_walls(&empty, Coord::new(0, 0), Coord::new(5, 5)), 0);
        assert_eq!(trace_walls(&empty, Coord::new(3, 3), Coord::new(3, 3)), 0);

        let mut occ = vec![false; 49];
        occ[3 * 7 + 3] = true;
        let map = SiteMap::new(7, 7, 1.0, occ, None, None).unwrap();
        assert_eq!(trace_walls(&map, Coord::new(3, 0), Coord::new(3, 6)), 1);
        assert_eq!(trace_walls(&map, Coord::new(3, 6), Coord::new(3, 0)), 1);
        // endpoint cells never count
        assert_eq!(trace_walls(&map, Coord::new(3, 3), Coord::new(3, 6)), 0);
    }

    #[test]
    fn limit_stops_early() {
        let occ = vec![true; 10];
        let map = SiteMap::new(10, 1, 1.0, occ, Some(vec![true; 10]), Some(vec![false; 10]));
        // receiver region empty is rejected, so give it one open cell instead
        assert!(map.is_err());
        let mut occ = vec![true; 10];
        occ[9] = false;
        let map = SiteMap::new(10, 1, 1.0, occ, Some(vec![true; 10]), None).unwrap();
        assert_eq!(trace_walls(&map, Coord::new(0, 0), Coord::new(0, 9)), 8);
        assert_eq!(count_walls(&map, Coord::new(0, 0), Coord::new(0, 9), 3), 3);
    }
}
