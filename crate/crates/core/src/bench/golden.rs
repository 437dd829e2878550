//! Plain-array reference implementations, independent of the IR.

use super::Shape;

fn relu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn dense(x: &[f32], w: &[f32], b: &[f32], outputs: usize) -> Vec<f32> {
    (0..outputs)
        .map(|j| {
            let mut acc = 0.0f32;
            for (i, xv) in x.iter().enumerate() {
                acc += xv * w[i * outputs + j];
            }
            acc + b[j]
        })
        .collect()
}

fn softmax(x: &[f32]) -> Vec<f32> {
    let m = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f32> = x.iter().map(|v| (v - m).exp()).collect();
    let mut sum = 0.0f32;
    for v in &e {
        sum += v;
    }
    e.iter().map(|v| v / sum).collect()
}

fn conv2d(img: &[f32], filt: &[f32], h: usize, w: usize, c: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for k in 0..c {
                let mut acc = 0.0f32;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let (iy, ix) = (y as i64 + ky as i64 - 1, x as i64 + kx as i64 - 1);
                        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                            continue;
                        }
                        acc += img[iy as usize * w + ix as usize] * filt[(ky * 3 + kx) * c + k];
                    }
                }
                out[(y * w + x) * c + k] = acc;
            }
        }
    }
    out
}

fn maxpool(img: &[f32], h: usize, w: usize) -> Vec<f32> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0f32; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            let mut m = f32::NEG_INFINITY;
            for dy in 0..2 {
                for dx in 0..2 {
                    let v = img[(2 * oy + dy) * w + 2 * ox + dx];
                    if v > m {
                        m = v;
                    }
                }
            }
            out[oy * ow + ox] = m;
        }
    }
    out
}

fn mix(x: f32) -> f32 {
    let r = relu(x.tanh().exp());
    1.0 / (1.0 + (0.0 - r).exp())
}

/// Reference output for already shape-checked inputs.
pub(super) fn golden(shape: &Shape, a: &[Vec<f32>]) -> Vec<f32> {
    match *shape {
        Shape::VecMul { .. } => a[0].iter().zip(&a[1]).map(|(x, y)| x * y).collect(),
        Shape::Dense { outputs, relu: r, .. } => {
            let z = dense(&a[0], &a[1], &a[2], outputs);
            if r {
                z.into_iter().map(relu).collect()
            } else {
                z
            }
        }
        Shape::Softmax { .. } => softmax(&a[0]),
        Shape::Conv2d { h, w, channels } => conv2d(&a[0], &a[1], h, w, channels),
        Shape::MaxPool { h, w } => maxpool(&a[0], h, w),
        Shape::Mix { .. } => a[0].iter().map(|&x| mix(x)).collect(),
        Shape::Mlp { outputs, .. } => softmax(&dense(&a[0], &a[1], &a[2], outputs)),
    }
}
