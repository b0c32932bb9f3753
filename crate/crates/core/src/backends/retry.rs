use std::time::Duration;

use super::BackendError;

/// Exponential backoff for transient transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    pub fn no_retry() -> Self {
        Self { max_attempts: 1, ..Self::default() }
    }

    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `op`, retrying while it fails with [`BackendError::Transport`].
    /// Any other error is returned immediately.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, BackendError>) -> Result<T, BackendError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Err(BackendError::Transport(msg)) if attempt + 1 < attempts => {
                    let wait = self.delay(attempt);
                    log::warn!("attempt {} failed ({msg}); retrying in {wait:?}", attempt + 1);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(BackendError::Transport(msg)) => {
                    return Err(BackendError::Transport(format!("{msg} (after {attempts} attempts)")));
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts: attempts,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(4),
        }
    }

    #[test]
    fn delays_double_then_cap() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(500));
        assert_eq!(p.delay(1), Duration::from_millis(1000));
        assert_eq!(p.delay(2), Duration::from_millis(2000));
        assert_eq!(p.delay(40), Duration::from_secs(30));
        assert_eq!(p.max_attempts, 3);
    }

    #[test]
    fn retries_transport_errors_up_to_the_limit() {
        let mut calls = 0;
        let r: Result<(), _> = fast(3).run(|_| {
            calls += 1;
            Err(BackendError::Transport("down".into()))
        });
        assert_eq!(calls, 3);
        assert!(matches!(r, Err(BackendError::Transport(m)) if m.contains("after 3 attempts")));
    }

    #[test]
    fn recovers_after_a_transient_failure() {
        let r =
            fast(3).run(|attempt| if attempt == 0 { Err(BackendError::Transport("blip".into())) } else { Ok(attempt) });
        assert_eq!(r, Ok(1));
    }

    #[test]
    fn protocol_errors_are_not_retried() {
        let mut calls = 0;
        let r: Result<(), _> = fast(5).run(|_| {
            calls += 1;
            Err(BackendError::Protocol("bad json".into()))
        });
        assert_eq!(calls, 1);
        assert!(r.is_err());
    }
}
