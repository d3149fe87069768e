pub mod cli;
pub mod conformance;
pub mod corpus;
pub mod deployer;
pub mod frontend;
pub mod proxy;
pub mod sim;
pub mod spec;
pub mod verify;
