use serde::{Deserialize, Serialize};

use crate::engine::Duration;
use crate::mac::AcIndex;
use crate::phy::{FrameKind, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dest {
    Node(NodeId),
    Broadcast,
}

impl Dest {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Dest::Node(n) => Some(n),
            Dest::Broadcast => None,
        }
    }
}

/// Sharing descriptor carried by RTS-share and CTS-share frames.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShareInfo {
    /// Polling order and the time granted to each shared STA.
    pub allocations: Vec<(NodeId, Duration)>,
    /// Access category of each shared STA's traffic. Carried for
    /// completeness; the AP does not reorder on it.
    pub priority: Vec<(NodeId, AcIndex)>,
    /// Data frames the holder sends before polling starts.
    pub holder_frames: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    pub dst: Dest,
    pub payload_bytes: u32,
    /// Reservation announced to third parties, counted from the frame's end.
    pub nav: Duration,
    pub share: Option<ShareInfo>,
}

impl Frame {
    pub fn control(kind: FrameKind, src: NodeId, dst: Dest, nav: Duration) -> Frame {
        debug_assert!(kind != FrameKind::Data);
        Frame {
            kind,
            src,
            dst,
            payload_bytes: 0,
            nav,
            share: None,
        }
    }

    pub fn data(src: NodeId, dst: NodeId, payload_bytes: u32, nav: Duration) -> Frame {
        Frame {
            kind: FrameKind::Data,
            src,
            dst: Dest::Node(dst),
            payload_bytes,
            nav,
            share: None,
        }
    }

    pub fn with_share(mut self, info: ShareInfo) -> Frame {
        debug_assert!(matches!(self.kind, FrameKind::RtsShare | FrameKind::CtsShare));
        self.share = Some(info);
        self
    }

    /// share_info is present exactly on the two sharing handshake frames.
    pub fn well_formed(&self) -> bool {
        let sharing = matches!(self.kind, FrameKind::RtsShare | FrameKind::CtsShare);
        sharing == self.share.is_some() && (self.kind == FrameKind::Data) == (self.payload_bytes > 0)
    }
}
