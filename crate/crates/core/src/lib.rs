pub mod basis;
pub mod error;
pub mod frame;
pub mod ode;
pub mod pchip;
pub mod problem;
pub mod quadrature;
pub mod system;
pub mod taylor;
pub mod trajectory;
pub mod matcher;
pub mod oracle;
pub mod spectrum;
pub mod config;
