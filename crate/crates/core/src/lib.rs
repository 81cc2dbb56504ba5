pub mod codegen;
pub mod diag;
pub mod fragmenter;
pub mod ident;
pub mod pipeline;
pub mod policy;
pub mod schema;
pub mod simulator;
pub mod topology;
pub mod validator;
pub mod value;
