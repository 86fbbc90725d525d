pub mod batch;
pub mod config;
pub mod fabric;
pub mod gateway;
pub mod http;
pub mod monitor;
pub mod nlu;
pub mod transcript;
