use super::D2GanConfig;
use crate::error::{Error, Result};
use crate::nn::{Adam, Stack, Tensor4};

/// Discriminator outputs for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub real_d1: Vec<f64>,
    pub real_d2: Vec<f64>,
    pub fake_d1: Vec<f64>,
    pub fake_d2: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct D2GanLosses {
    /// mean(α·ln D1(x) − D1(G)), maximized by D1.
    pub d1: f64,
    /// mean(β·ln D2(G) − D2(x)), maximized by D2.
    pub d2: f64,
    /// mean(β·ln D2(G) − D1(G)), minimized by the generator.
    pub g_adv: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_scores(s: &Scores) -> Result<()> {
    let n = s.real_d1.len();
    if n == 0 || [s.real_d2.len(), s.fake_d1.len(), s.fake_d2.len()].iter().any(|&l| l != n) {
        return Err(Error::InvalidArgument("score batches must be non-empty and equal length".into()));
    }
    let all = s.real_d1.iter().chain(&s.real_d2).chain(&s.fake_d1).chain(&s.fake_d2);
    if let Some(bad) = all.copied().find(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("discriminator score {bad} is not strictly positive")));
    }
    Ok(())
}

pub fn d2gan_losses(scores: &Scores, config: &D2GanConfig) -> Result<D2GanLosses> {
    config.validate()?;
    check_scores(scores)?;
    let ln_mean = |v: &[f64]| v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64;
    let f2_log = config.beta * ln_mean(&scores.fake_d2);
    Ok(D2GanLosses {
        d1: config.alpha * ln_mean(&scores.real_d1) - mean(&scores.fake_d1),
        d2: f2_log - mean(&scores.real_d2),
        g_adv: f2_log - mean(&scores.fake_d1),
    })
}

/// Full three-player objective: α·E[ln D1(x)] − E[D1(G)] − E[D2(x)] + β·E[ln D2(G)].
pub fn d2gan_objective(scores: &Scores, config: &D2GanConfig) -> Result<f64> {
    let l = d2gan_losses(scores, config)?;
    Ok(l.d1 + l.d2)
}

fn scores_of(t: &Tensor4) -> Vec<f64> {
    t.data().to_vec()
}

fn score_grad(like: &Tensor4, g: impl Fn(f64) -> f64) -> Tensor4 {
    let mut out = like.clone();
    out.data_mut().iter_mut().for_each(|v| *v = g(*v));
    out
}

/// Discriminators with their optimizers.
pub(crate) struct Critics<'a> {
    pub d1: &'a mut Stack,
    pub d2: &'a mut Stack,
    pub opt1: &'a mut Adam,
    pub opt2: &'a mut Adam,
}

impl Critics<'_> {
    /// One ascent step on each discriminator; returns (L_D1, L_D2) before the step.
    pub fn step(&mut self, real: &Tensor4, fake: &Tensor4, config: &D2GanConfig) -> Result<(f64, f64)> {
        let m = real.batch() as f64;
        let (alpha, beta) = (config.alpha, config.beta);

        let (r1, c_r1) = self.d1.forward_train(real.clone())?;
        let (f1, c_f1) = self.d1.forward_train(fake.clone())?;
        let (r2, c_r2) = self.d2.forward_train(real.clone())?;
        let (f2, c_f2) = self.d2.forward_train(fake.clone())?;
        let losses = d2gan_losses(
            &Scores {
                real_d1: scores_of(&r1),
                real_d2: scores_of(&r2),
                fake_d1: scores_of(&f1),
                fake_d2: scores_of(&f2),
            },
            config,
        )?;
        if !(losses.d1.is_finite() && losses.d2.is_finite()) {
            return Err(Error::TrainingDiverged("non-finite discriminator loss".into()));
        }

        // Adam minimizes, so descend on −L_D1 and −L_D2.
        self.d1.zero_grad();
        self.d1.backward(c_r1, score_grad(&r1, |s| -alpha / (m * s)))?;
        self.d1.backward(c_f1, score_grad(&f1, |_| 1.0 / m))?;
        self.opt1.step(&mut self.d1.params_mut())?;

        self.d2.zero_grad();
        self.d2.backward(c_f2, score_grad(&f2, |s| -beta / (m * s)))?;
        self.d2.backward(c_r2, score_grad(&r2, |_| 1.0 / m))?;
        self.opt2.step(&mut self.d2.params_mut())?;
        Ok((losses.d1, losses.d2))
    }

    /// L_G_adv for `fake` and its gradient with respect to `fake`. The
    /// discriminator parameters are left untouched.
    pub fn generator_grad(&mut self, fake: &Tensor4, config: &D2GanConfig) -> Result<(f64, Tensor4)> {
        let m = fake.batch() as f64;
        let (f1, c1) = self.d1.forward_train(fake.clone())?;
        let (f2, c2) = self.d2.forward_train(fake.clone())?;
        let f1s = scores_of(&f1);
        let f2s = scores_of(&f2);
        check_scores(&Scores {
            real_d1: f1s.clone(),
            real_d2: f2s.clone(),
            fake_d1: f1s.clone(),
            fake_d2: f2s.clone(),
        })?;
        let loss = config.beta * f2s.iter().map(|s| s.ln()).sum::<f64>() / m - mean(&f1s);
        let mut grad = self.d1.backward(c1, score_grad(&f1, |_| -1.0 / m))?;
        grad.add_assign(&self.d2.backward(c2, score_grad(&f2, |s| config.beta / (m * s)))?)?;
        self.d1.zero_grad();
        self.d2.zero_grad();
        Ok((loss, grad))
    }
}
