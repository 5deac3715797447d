use crate::engine::SimTime;

use super::NodeId;

/// Smallest packet the model carries (bare IP + TCP headers).
pub const MIN_PACKET_BYTES: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Syn,
    SynAck,
    Ack,
    Data,
    Udp,
    IcmpUnreach,
    PuzzleChallenge,
    PuzzleResponse,
    PushbackRequest,
    BlockRequest,
}

impl PacketKind {
    pub const ALL: [PacketKind; 10] = [
        PacketKind::Syn,
        PacketKind::SynAck,
        PacketKind::Ack,
        PacketKind::Data,
        PacketKind::Udp,
        PacketKind::IcmpUnreach,
        PacketKind::PuzzleChallenge,
        PacketKind::PuzzleResponse,
        PacketKind::PushbackRequest,
        PacketKind::BlockRequest,
    ];

    /// Messages exchanged by the defense itself rather than by endpoints.
    pub fn is_defense_plane(self) -> bool {
        matches!(
            self,
            PacketKind::PuzzleChallenge
                | PacketKind::PuzzleResponse
                | PacketKind::PushbackRequest
                | PacketKind::BlockRequest
        )
    }

    /// Kinds carrying a payload-sized body by default.
    pub fn is_bulk(self) -> bool {
        matches!(self, PacketKind::Data | PacketKind::Udp)
    }

    pub fn name(self) -> &'static str {
        match self {
            PacketKind::Syn => "SYN",
            PacketKind::SynAck => "SYNACK",
            PacketKind::Ack => "ACK",
            PacketKind::Data => "DATA",
            PacketKind::Udp => "UDP",
            PacketKind::IcmpUnreach => "ICMP_UNREACH",
            PacketKind::PuzzleChallenge => "PUZZLE_CH",
            PacketKind::PuzzleResponse => "PUZZLE_RESP",
            PacketKind::PushbackRequest => "PUSHBACK_REQ",
            PacketKind::BlockRequest => "BLOCK_REQ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeMsg {
    pub challenge_id: u64,
    pub difficulty_bits: u32,
    pub issued_by: NodeId,
    pub deadline: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMsg {
    pub challenge_id: u64,
    pub nonce: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushbackMsg {
    pub sig_id: u32,
    pub victim: NodeId,
    pub suspects: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMsg {
    pub suspect: NodeId,
    pub ttl: SimTime,
}

/// Kind plus kind-specific payload. Only the defense-plane kinds carry one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Syn,
    SynAck,
    Ack,
    Data,
    Udp,
    IcmpUnreach,
    PuzzleChallenge(ChallengeMsg),
    PuzzleResponse(ResponseMsg),
    PushbackRequest(PushbackMsg),
    BlockRequest(BlockMsg),
}

impl Body {
    pub fn kind(&self) -> PacketKind {
        match self {
            Body::Syn => PacketKind::Syn,
            Body::SynAck => PacketKind::SynAck,
            Body::Ack => PacketKind::Ack,
            Body::Data => PacketKind::Data,
            Body::Udp => PacketKind::Udp,
            Body::IcmpUnreach => PacketKind::IcmpUnreach,
            Body::PuzzleChallenge(_) => PacketKind::PuzzleChallenge,
            Body::PuzzleResponse(_) => PacketKind::PuzzleResponse,
            Body::PushbackRequest(_) => PacketKind::PushbackRequest,
            Body::BlockRequest(_) => PacketKind::BlockRequest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub pkt_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub flow_tag: u32,
    pub created_at: SimTime,
    pub body: Body,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        self.body.kind()
    }
}

/// A packet before the factory assigns its id, size and timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketDraft {
    pub src: NodeId,
    pub dst: NodeId,
    pub flow_tag: u32,
    pub body: Body,
}

impl PacketDraft {
    pub fn new(src: NodeId, dst: NodeId, flow_tag: u32, body: Body) -> Self {
        PacketDraft {
            src,
            dst,
            flow_tag,
            body,
        }
    }
}

/// Default wire sizes by kind class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSizes {
    pub control_bytes: u32,
    pub data_bytes: u32,
}

impl Default for PacketSizes {
    fn default() -> Self {
        PacketSizes {
            control_bytes: 40,
            data_bytes: 512,
        }
    }
}

/// Stamps ids, sizes and creation times onto outgoing packets.
#[derive(Debug, Clone)]
pub struct PacketFactory {
    next_id: u64,
    sizes: PacketSizes,
}

impl PacketFactory {
    pub fn new(sizes: PacketSizes) -> Self {
        assert!(sizes.control_bytes >= MIN_PACKET_BYTES && sizes.data_bytes >= MIN_PACKET_BYTES);
        PacketFactory { next_id: 0, sizes }
    }

    pub fn make(&mut self, src: NodeId, dst: NodeId, flow_tag: u32, body: Body, now: SimTime) -> Packet {
        assert_ne!(src, dst, "packet addressed to its own source");
        let size_bytes = if body.kind().is_bulk() {
            self.sizes.data_bytes
        } else {
            self.sizes.control_bytes
        };
        let pkt_id = self.next_id;
        self.next_id += 1;
        Packet {
            pkt_id,
            src,
            dst,
            size_bytes,
            flow_tag,
            created_at: now,
            body,
        }
    }

    pub fn build(&mut self, draft: PacketDraft, now: SimTime) -> Packet {
        self.make(draft.src, draft.dst, draft.flow_tag, draft.body, now)
    }

    pub fn issued(&self) -> u64 {
        self.next_id
    }
}
