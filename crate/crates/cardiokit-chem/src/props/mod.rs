//! Physicochemical properties, descriptors, fingerprints and scaffolds.

pub mod descriptors;
pub mod fingerprint;
pub mod properties;
pub mod scaffold;
pub mod tables;

pub use descriptors::{
    compute_descriptors, descriptor_layout, descriptor_layout_tsv, DescriptorVector,
    DESCRIPTOR_LAYOUT_VERSION, DESCRIPTOR_LEN,
};
pub use fingerprint::{morgan_fingerprint, tanimoto, Fingerprint, FP_BITS, FP_RADIUS};
pub use properties::{physchem_properties, PropertyVector, PROPERTY_NAMES};
pub use scaffold::murcko_scaffold;
