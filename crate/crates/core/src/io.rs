//! (implementation in progress)
