use std::collections::VecDeque;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

/// Sliding one-second window limiter shared by all callers of a client.
#[derive(Debug)]
pub struct Pacer {
    per_second: usize,
    issued: Mutex<VecDeque<Instant>>,
}

const WINDOW: Duration = Duration::from_secs(1);

impl Pacer {
    /// At most `floor(max_per_second)` (and at least one) requests per second.
    pub fn new(max_per_second: f64) -> Self {
        let per_second = if max_per_second.is_finite() {
            (max_per_second.floor() as usize).max(1)
        } else {
            usize::MAX
        };
        Self {
            per_second,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_second(&self) -> usize {
        self.per_second
    }

    /// Blocks until a request may be issued, then records and returns its slot in the window.
    pub fn acquire(&self) -> Instant {
        loop {
            let wait = {
                let mut q = self.issued.lock();
                let now = Instant::now();
                while q.front().is_some_and(|t| now.duration_since(*t) >= WINDOW) {
                    q.pop_front();
                }
                if q.len() < self.per_second {
                    q.push_back(now);
                    return now;
                }
                WINDOW - now.duration_since(*q.front().expect("window is full"))
            };
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    #[test]
    fn no_window_exceeds_the_limit() {
        let pacer = Arc::new(Pacer::new(25.0));
        let stamps = Arc::new(Mutex::new(Vec::new()));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let (p, s) = (Arc::clone(&pacer), Arc::clone(&stamps));
                std::thread::spawn(move || {
                    for _ in 0..15 {
                        let at = p.acquire();
                        s.lock().push(at);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let mut t = stamps.lock().clone();
        t.sort();
        assert_eq!(t.len(), 60);
        for (i, start) in t.iter().enumerate() {
            let in_window = t[i..].iter().take_while(|x| x.duration_since(*start) < WINDOW).count();
            assert!(in_window <= 25, "{in_window} requests inside one second");
        }
    }

    #[test]
    fn fractional_rates_round_down_but_never_to_zero() {
        assert_eq!(Pacer::new(2.9).per_second(), 2);
        assert_eq!(Pacer::new(0.5).per_second(), 1);
    }
}
