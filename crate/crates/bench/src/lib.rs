//! Shared fixtures for the benchmarks.

use contact_qsd::Configuration;

/// Initial interval `{0, …, n-1}` in one dimension.
pub fn interval(n: i32) -> Configuration {
    Configuration::interval(0, n - 1)
}
