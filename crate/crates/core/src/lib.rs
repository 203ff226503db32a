pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod linalg;
pub mod operator;
pub mod orthopoly;
pub mod par;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod sobolev;
pub mod symmetrizer;
