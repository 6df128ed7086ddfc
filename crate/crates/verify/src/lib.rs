//! Holds the acceptance suite (`cargo test -p tobitm-verify --test acceptance`).
//! It lives in its own package so the regular unit and integration tests of
//! the other crates run first.
