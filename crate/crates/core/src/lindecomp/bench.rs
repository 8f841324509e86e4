use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::Fft2;
use super::svd::{svd, SvdFactors};
use crate::{Error, Result};

/// Median wall time of one formation, in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub decompose_ms: f64,
    pub compose_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// `[channels, height, width]`
    pub shape: [usize; 3],
    pub repetitions: usize,
    pub svd: PhaseTimes,
    pub fft: PhaseTimes,
    /// `svd.total_ms / fft.total_ms`
    pub speedup: f64,
}

impl BenchReport {
    /// `method,decompose_ms,compose_ms,total_ms`
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["method", "decompose_ms", "compose_ms", "total_ms"])?;
        for (name, t) in [("svd", &self.svd), ("fft", &self.fft)] {
            wr.write_record([
                name.to_string(),
                t.decompose_ms.to_string(),
                t.compose_ms.to_string(),
                t.total_ms.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// The six positive timings (decompose, compose, total for each method).
    pub fn timings(&self) -> [f64; 6] {
        [
            self.svd.decompose_ms,
            self.svd.compose_ms,
            self.svd.total_ms,
            self.fft.decompose_ms,
            self.fft.compose_ms,
            self.fft.total_ms,
        ]
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn phase(dec: &mut [f64], comp: &mut [f64]) -> PhaseTimes {
    let decompose_ms = median(dec);
    let compose_ms = median(comp);
    PhaseTimes {
        decompose_ms,
        compose_ms,
        total_ms: decompose_ms + compose_ms,
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Times per-channel full SVD + recomposition against per-channel forward +
/// inverse 2D FFT on the same random `c × h × w` tensor. Runs on the calling
/// thread only.
pub fn bench_decomp(c: usize, h: usize, w: usize, reps: usize, seed: u64) -> Result<BenchReport> {
    if c == 0 || h < 8 || w < 8 {
        return Err(Error::InvalidParameter(format!(
            "bench dims must be c >= 1, h >= 8, w >= 8; got {c}x{h}x{w}"
        )));
    }
    if reps < 3 {
        return Err(Error::InvalidParameter(format!("reps must be >= 3, got {reps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes: Vec<DMatrix<f64>> = (0..c)
        .map(|_| DMatrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0)))
        .collect();

    let (mut sd, mut sc, mut fd, mut fc) = (vec![], vec![], vec![], vec![]);
    let mut plan = Fft2::<f64>::new(h, w);
    let mut sink = 0.0;
    for _ in 0..reps {
        let t = Instant::now();
        let factors: Vec<SvdFactors> = planes.iter().map(svd).collect::<Result<_>>()?;
        sd.push(ms(t));
        let t = Instant::now();
        for f in &factors {
            sink += f.reconstruct()[(0, 0)];
        }
        sc.push(ms(t));

        let t = Instant::now();
        let mut spectra: Vec<Vec<Complex64>> = planes
            .iter()
            .map(|p| {
                let mut buf: Vec<Complex64> = (0..h * w).map(|i| Complex64::new(p[(i / w, i % w)], 0.0)).collect();
                plan.forward(&mut buf);
                buf
            })
            .collect();
        fd.push(ms(t));
        let t = Instant::now();
        for buf in &mut spectra {
            plan.inverse(buf);
            sink += buf[0].re;
        }
        fc.push(ms(t));
    }
    std::hint::black_box(sink);

    let svd_t = phase(&mut sd, &mut sc);
    let fft_t = phase(&mut fd, &mut fc);
    Ok(BenchReport {
        shape: [c, h, w],
        repetitions: reps,
        speedup: svd_t.total_ms / fft_t.total_ms,
        svd: svd_t,
        fft: fft_t,
    })
}
