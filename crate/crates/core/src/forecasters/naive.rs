use super::{Forecast, ForecastTask, Forecaster};
use crate::error::Result;

/// Carries the last context value forward.
pub fn naive_forecast(task: &ForecastTask) -> Result<Forecast> {
    task.validate()?;
    let last = *task.context.last().expect("validated context is non-empty");
    Ok(Forecast::new(vec![last; task.horizon], "naive"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Naive;

impl Forecaster for Naive {
    fn id(&self) -> String {
        "naive".into()
    }

    fn forecast(&self, task: &ForecastTask) -> Result<Forecast> {
        let (out, t) = super::timed(|| naive_forecast(task));
        let mut f = out?;
        f.inference_walltime = t;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::smape_cumulative;
    use proptest::prelude::*;

    #[test]
    fn repeats_last_value() {
        let task = ForecastTask::new(vec![1.0, -2.0, 5.0], 3, 0, 0.1).unwrap();
        assert_eq!(naive_forecast(&task).unwrap().values, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn constant_context_scores_zero() {
        let task = ForecastTask::new(vec![2.5; 10], 4, 0, 0.1).unwrap();
        let f = naive_forecast(&task).unwrap();
        assert_eq!(smape_cumulative(&[2.5; 4], &f.values, 1).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn output_is_constant_last_value(
            ctx in proptest::collection::vec(-1e6f64..1e6, 2..50),
            h in 1usize..40,
        ) {
            let task = ForecastTask::new(ctx.clone(), h, 0, 0.1).unwrap();
            let f = naive_forecast(&task).unwrap();
            prop_assert_eq!(f.values.len(), h);
            prop_assert!(f.values.iter().all(|v| v.to_bits() == ctx[ctx.len() - 1].to_bits()));
        }
    }
}
