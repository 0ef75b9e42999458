//! Firmware transplantation toolkit for Arm Cortex-M (Thumb-2) images.
//!
//! The pipeline: [`image`] loads a raw firmware binary plus a memory-map
//! config into an address-space representation preserving the MCU's
//! physical layout; [`analysis`] recovers basic blocks and classifies the
//! instructions that need rewriting; [`rewriter`] produces and applies the
//! transplantation plan (trap tables, coverage trampolines, HAL redirects);
//! [`runtime`] executes original or transplanted images in a reference
//! interpreter with faithful exception entry/return, banked stack pointers
//! and a virtual instruction-count clock; [`hlm`] hosts the native
//! peripheral handlers invoked at HAL call sites; [`harness`] drives
//! snapshot-based coverage-guided fuzzing and crash triage on top.

pub mod analysis;
pub mod harness;
pub mod hlm;
pub mod image;
pub mod rewriter;
pub mod runtime;
pub mod thumb2;

pub mod corpus;
