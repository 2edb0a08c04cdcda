pub mod chain;
pub mod fedmining;
pub mod gc;
pub mod he;
pub mod sim;
pub mod trading;
pub mod transcript;
