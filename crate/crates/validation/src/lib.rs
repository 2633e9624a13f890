//! Holds the end-to-end acceptance target; run it with
//! `cargo test -p lindblad-validation --test acceptance`.
