// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end for `varseg`.

#![forbid(unsafe_code)]

pub mod app;
pub mod config;
