/// Running mean and sample standard deviation with compensated sums.
#[derive(Debug, Clone, Default)]
pub struct MeanStd {
    n: usize,
    sum: f64,
    sum_c: f64,
    sq: f64,
    sq_c: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl MeanStd {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        neumaier(&mut self.sum, &mut self.sum_c, x);
        neumaier(&mut self.sq, &mut self.sq_c, x * x);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        (self.sum + self.sum_c) / self.n as f64
    }

    /// Sample standard deviation; zero for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sq + self.sq_c) - n * mean * mean) / (n - 1.0);
        var.max(0.0).sqrt()
    }
}
