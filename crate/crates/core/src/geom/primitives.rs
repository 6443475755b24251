use super::Point;

/// Closest point to `p` on segment `[a, b]`.
pub fn closest_on_segment<const D: usize>(p: &Point<D>, a: &Point<D>, b: &Point<D>) -> Point<D> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point to `p` on the filled triangle `abc`.
///
/// Voronoi-region walk over vertices, edges and the face, using only dot
/// products, so it works in any dimension.
pub fn closest_on_triangle<const D: usize>(
    p: &Point<D>,
    a: &Point<D>,
    b: &Point<D>,
    c: &Point<D>,
) -> Point<D> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_endpoints_and_interior() {
        let a = Point::<2>::new(0.0, 0.0);
        let b = Point::<2>::new(1.0, 0.0);
        assert_eq!(closest_on_segment(&Point::<2>::new(-1.0, 1.0), &a, &b), a);
        assert_eq!(closest_on_segment(&Point::<2>::new(2.0, 1.0), &a, &b), b);
        assert_eq!(closest_on_segment(&Point::<2>::new(0.25, 1.0), &a, &b), Point::<2>::new(0.25, 0.0));
    }

    #[test]
    fn triangle_regions() {
        let a = Point::<3>::new(0.0, 0.0, 0.0);
        let b = Point::<3>::new(1.0, 0.0, 0.0);
        let c = Point::<3>::new(0.0, 1.0, 0.0);
        // face interior
        let q = closest_on_triangle(&Point::<3>::new(0.2, 0.2, 0.5), &a, &b, &c);
        assert!((q - Point::<3>::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        // vertex region
        assert_eq!(closest_on_triangle(&Point::<3>::new(-1.0, -1.0, 0.3), &a, &b, &c), a);
        // hypotenuse edge
        let q = closest_on_triangle(&Point::<3>::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Point::<3>::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }
}
