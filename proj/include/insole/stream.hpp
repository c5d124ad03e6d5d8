#pragma once

#include "insole/infer.hpp"
#include "insole/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace insole {

// 14-byte little-endian wire frame:
//   0x53 0x4B | u16 seq | u32 timestamp_ms | u16 hallux | u16 pinky | u16 heel
// Channel values are 12-bit; the top 4 bits of each u16 must be zero.
inline constexpr std::size_t kWireFrameSize = 14;
inline constexpr std::uint8_t kFrameMagic0 = 0x53;  // 'S'
inline constexpr std::uint8_t kFrameMagic1 = 0x4B;  // 'K'

struct WireFrame {
  std::uint16_t seq = 0;
  std::uint32_t timestamp_ms = 0;
  std::uint16_t hallux = 0;
  std::uint16_t pinky = 0;
  std::uint16_t heel = 0;

  std::uint16_t channel(int i) const {
    return i == 0 ? hallux : (i == 1 ? pinky : heel);
  }
  PressureFrame to_pressure_frame() const {
    return {timestamp_ms, hallux, pinky, heel};
  }
};

std::array<std::uint8_t, kWireFrameSize> encode_frame(const PressureFrame& frame,
                                                      std::uint16_t seq);
std::array<std::uint8_t, kWireFrameSize> encode_wire(const WireFrame& frame);

enum class FrameError : std::uint8_t { None, ShortBuffer, BadMagic, ChannelRange };

// Decode outcome; on failure `offset` is the byte position of the violation.
struct DecodeResult {
  bool ok = false;
  WireFrame frame;
  FrameError error = FrameError::None;
  std::size_t offset = 0;
};

DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

// Frame log: concatenated 14-byte wire frames (".skl").
void write_frame_log(const std::filesystem::path& path,
                     const std::vector<PressureFrame>& frames,
                     std::uint16_t first_seq = 0);
std::vector<WireFrame> read_frame_log(const std::filesystem::path& path);

// Gathers contiguous frames into per-channel blocks of block_len samples.
// Completion hands back the channel-major feature vector and clears the
// buffers (blocks never overlap). A sequence discontinuity discards the
// partial block; the frame that exposed the gap starts the next block.
class BlockAssembler {
 public:
  explicit BlockAssembler(int block_len = kBlockLen);

  std::optional<Eigen::VectorXf> push(const WireFrame& frame);

  int fill() const { return fill_; }
  std::uint64_t gaps() const { return gaps_; }
  std::uint64_t frames_discarded() const { return frames_discarded_; }
  std::uint32_t last_timestamp_ms() const { return last_timestamp_ms_; }

 private:
  int block_len_;
  Eigen::MatrixXf buffer_;  // block_len x channels
  int fill_ = 0;
  bool expect_valid_ = false;
  std::uint16_t expected_seq_ = 0;
  std::uint64_t gaps_ = 0;
  std::uint64_t frames_discarded_ = 0;
  std::uint32_t last_timestamp_ms_ = 0;
};

struct FeedbackEvent {
  std::uint32_t timestamp_ms = 0;
  ClassLabel label = ClassLabel::Neutral;
  Eigen::Vector3d probabilities = Eigen::Vector3d::Zero();
  bool vibrate = false;  // fires iff the label is non-neutral
};

// One line per event: "timestamp_ms,label,p0,p1,p2,vibrate".
std::string feedback_line(const FeedbackEvent& event);

struct StreamStats {
  std::uint64_t frames_seen = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t gaps = 0;
  std::uint64_t frames_discarded = 0;
  std::uint64_t events = 0;
};

struct StreamRun {
  std::vector<FeedbackEvent> events;
  StreamStats stats;
};

using EventSink = std::function<void(const FeedbackEvent&)>;

// Classifies a decoded frame sequence (replay path: identical math to the
// live path, no transport).
StreamRun classify_frames(InferenceEngine& engine, std::span<const WireFrame> frames,
                          int block_len = kBlockLen, const EventSink& sink = {});

// Replays a frame log through the classifier.
StreamRun classify_log(InferenceEngine& engine, const std::filesystem::path& log_path,
                       int block_len = kBlockLen, const EventSink& sink = {});

// --- datagram transport ------------------------------------------------

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 9750;
  double rate_hz = 100.0;  // one frame per 10 ms at the nominal rate
};

// Emits each frame as one UDP datagram, paced at rate_hz against absolute
// deadlines. Returns the number of frames sent.
std::size_t serve_frames_udp(const std::vector<PressureFrame>& frames,
                             const ServeOptions& options);

struct LiveOptions {
  std::uint16_t port = 9750;
  int block_len = kBlockLen;
  // Stop after this many frames (0 = no cap).
  std::uint64_t max_frames = 0;
  // Stop when no datagram arrives for this long.
  double idle_timeout_s = 2.0;
  std::size_t queue_capacity = 256;
};

// Receives datagrams on `port` and classifies them live. One reader thread
// feeds a bounded queue (blocking on overflow, so ingest never drops);
// the classifier drains it. Runs until max_frames or the idle timeout.
StreamRun classify_live_udp(InferenceEngine& engine, const LiveOptions& options,
                            const EventSink& sink = {});

}  // namespace insole
