//! Neural models: the transformer language models (generation and feature
//! extraction) and the fusion discriminator for cardiac ion-channel
//! activity prediction.

pub mod discriminator;
pub mod transformer;
