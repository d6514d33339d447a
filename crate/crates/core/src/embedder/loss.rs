use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[default]
    Cosine,
    Euclidean,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Cosine distance treats a zero vector as orthogonal to everything.
pub fn distance(kind: DistanceKind, x: &[f64], y: &[f64]) -> f64 {
    match kind {
        DistanceKind::Cosine => {
            let (nx, ny) = (norm(x), norm(y));
            if nx == 0.0 || ny == 0.0 {
                1.0
            } else {
                1.0 - dot(x, y) / (nx * ny)
            }
        }
        DistanceKind::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    }
}

/// Gradients of `distance(kind, x, y)` with respect to `x` and `y`. Zero where
/// the distance is not differentiable.
pub fn distance_grad(kind: DistanceKind, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match kind {
        DistanceKind::Cosine => {
            let (nx, ny) = (norm(x), norm(y));
            if nx == 0.0 || ny == 0.0 {
                return (vec![0.0; x.len()], vec![0.0; y.len()]);
            }
            let c = dot(x, y) / (nx * ny);
            let gx = x.iter().zip(y).map(|(a, b)| -(b / (nx * ny) - c * a / (nx * nx))).collect();
            let gy = x.iter().zip(y).map(|(a, b)| -(a / (nx * ny) - c * b / (ny * ny))).collect();
            (gx, gy)
        }
        DistanceKind::Euclidean => {
            let d = distance(kind, x, y);
            if d == 0.0 {
                return (vec![0.0; x.len()], vec![0.0; y.len()]);
            }
            let gx: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b) / d).collect();
            let gy = gx.iter().map(|g| -g).collect();
            (gx, gy)
        }
    }
}

/// max(d(a, p) - d(a, n) + margin, 0); NaN propagates.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64, kind: DistanceKind) -> f64 {
    let raw = distance(kind, a, p) - distance(kind, a, n) + margin;
    if raw.is_nan() {
        raw
    } else {
        raw.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Loss and subgradient; the subgradient is zero at and below the hinge.
pub fn triplet_loss_grad(a: &[f64], p: &[f64], n: &[f64], margin: f64, kind: DistanceKind) -> TripletGrad {
    let loss = triplet_loss(a, p, n, margin, kind);
    if loss <= 0.0 {
        let z = vec![0.0; a.len()];
        return TripletGrad { loss, anchor: z.clone(), positive: z.clone(), negative: z };
    }
    let (gap, gp) = distance_grad(kind, a, p);
    let (gan, gn) = distance_grad(kind, a, n);
    TripletGrad {
        loss,
        anchor: gap.iter().zip(&gan).map(|(x, y)| x - y).collect(),
        positive: gp,
        negative: gn.into_iter().map(|g| -g).collect(),
    }
}
