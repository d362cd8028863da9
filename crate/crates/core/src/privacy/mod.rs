//! Differential-privacy noising, closed-form gradient inversion against a
//! linear-softmax head, and the PSNR reconstruction metric.

mod dlg;
mod dp;
mod psnr;

pub use dlg::{dlg_attack, dlg_invert, head_gradient, DlgResult};
pub use dp::{dp_privatize, dp_privatize_slice, DpConfig};
pub use psnr::psnr;
