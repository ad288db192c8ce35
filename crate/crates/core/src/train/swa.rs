use crate::error::{Error, Result};
use crate::tensornet::Tensor;

/// Running arithmetic mean of parameter snapshots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwaState {
    count: usize,
    mean: Vec<Tensor>,
}

impl SwaState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[Tensor] {
        &self.mean
    }

    pub fn into_mean(self) -> Vec<Tensor> {
        self.mean
    }
}

/// Absorb one snapshot: `mean += (snap − mean) / (n + 1)`.
pub fn swa_update<'a>(
    state: &mut SwaState,
    snapshot: impl IntoIterator<Item = &'a Tensor>,
) -> Result<()> {
    let snap: Vec<&Tensor> = snapshot.into_iter().collect();
    if state.count == 0 {
        state.mean = snap.into_iter().cloned().collect();
        state.count = 1;
        return Ok(());
    }
    if snap.len() != state.mean.len()
        || snap
            .iter()
            .zip(&state.mean)
            .any(|(s, m)| s.dims() != m.dims())
    {
        return Err(Error::Shape(
            "snapshot does not match averaged parameters".into(),
        ));
    }
    let k = 1.0 / (state.count + 1) as f64;
    for (m, s) in state.mean.iter_mut().zip(snap) {
        for (a, &b) in m.data_mut().iter_mut().zip(s.data()) {
            *a += (b - *a) * k;
        }
    }
    state.count += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_two_snapshots() {
        let a = Tensor::vector(vec![1.0, 4.0]);
        let b = Tensor::vector(vec![3.0, -2.0]);
        let mut s = SwaState::new();
        swa_update(&mut s, [&a]).unwrap();
        assert_eq!(s.mean()[0], a);
        swa_update(&mut s, [&b]).unwrap();
        assert_eq!(s.mean()[0].data(), &[2.0, 1.0]);
        assert_eq!(s.count(), 2);
        assert!(swa_update(&mut s, [&Tensor::vector(vec![1.0])]).is_err());
    }
}
