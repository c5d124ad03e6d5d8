#include "insole/stream.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace insole {

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
  p[2] = static_cast<std::uint8_t>((v >> 16) & 0xFF);
  p[3] = static_cast<std::uint8_t>((v >> 24) & 0xFF);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

// RAII socket handle.
struct Socket {
  int fd = -1;
  explicit Socket(int f) : fd(f) {}
  ~Socket() {
    if (fd >= 0) ::close(fd);
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
};

FeedbackEvent make_event(InferenceEngine& engine, const Eigen::VectorXf& features,
                         std::uint32_t timestamp_ms) {
  const InferenceResult r = engine.infer(features);
  FeedbackEvent ev;
  ev.timestamp_ms = timestamp_ms;
  ev.label = r.label;
  ev.probabilities = r.probabilities;
  ev.vibrate = r.label != ClassLabel::Neutral;
  return ev;
}

}  // namespace

std::array<std::uint8_t, kWireFrameSize> encode_wire(const WireFrame& frame) {
  if (frame.hallux > kAdcMax || frame.pinky > kAdcMax || frame.heel > kAdcMax)
    throw std::invalid_argument("encode_frame: channel value exceeds 12 bits");
  std::array<std::uint8_t, kWireFrameSize> bytes{};
  bytes[0] = kFrameMagic0;
  bytes[1] = kFrameMagic1;
  put_u16(&bytes[2], frame.seq);
  put_u32(&bytes[4], frame.timestamp_ms);
  put_u16(&bytes[8], frame.hallux);
  put_u16(&bytes[10], frame.pinky);
  put_u16(&bytes[12], frame.heel);
  return bytes;
}

std::array<std::uint8_t, kWireFrameSize> encode_frame(const PressureFrame& frame,
                                                      std::uint16_t seq) {
  WireFrame w;
  w.seq = seq;
  w.timestamp_ms = frame.timestamp_ms;
  w.hallux = frame.hallux;
  w.pinky = frame.pinky;
  w.heel = frame.heel;
  return encode_wire(w);
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  DecodeResult result;
  if (bytes.size() < kWireFrameSize) {
    result.error = FrameError::ShortBuffer;
    result.offset = bytes.size();
    return result;
  }
  if (bytes[0] != kFrameMagic0) {
    result.error = FrameError::BadMagic;
    result.offset = 0;
    return result;
  }
  if (bytes[1] != kFrameMagic1) {
    result.error = FrameError::BadMagic;
    result.offset = 1;
    return result;
  }
  WireFrame frame;
  frame.seq = get_u16(&bytes[2]);
  frame.timestamp_ms = get_u32(&bytes[4]);
  frame.hallux = get_u16(&bytes[8]);
  frame.pinky = get_u16(&bytes[10]);
  frame.heel = get_u16(&bytes[12]);
  for (int c = 0; c < kNumChannels; ++c) {
    if (frame.channel(c) > kAdcMax) {
      result.error = FrameError::ChannelRange;
      result.offset = 8 + 2 * static_cast<std::size_t>(c);
      return result;
    }
  }
  result.ok = true;
  result.frame = frame;
  return result;
}

void write_frame_log(const std::filesystem::path& path,
                     const std::vector<PressureFrame>& frames, std::uint16_t first_seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::uint16_t seq = first_seq;
  for (const auto& f : frames) {
    const auto bytes = encode_frame(f, seq++);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<WireFrame> read_frame_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() % kWireFrameSize != 0)
    throw std::runtime_error("frame log " + path.string() + ": size not a multiple of " +
                             std::to_string(kWireFrameSize));
  std::vector<WireFrame> frames;
  frames.reserve(bytes.size() / kWireFrameSize);
  for (std::size_t off = 0; off < bytes.size(); off += kWireFrameSize) {
    const auto d = decode_frame(std::span(bytes).subspan(off, kWireFrameSize));
    if (!d.ok)
      throw std::runtime_error("frame log " + path.string() + ": bad frame at byte " +
                               std::to_string(off + d.offset));
    frames.push_back(d.frame);
  }
  return frames;
}

BlockAssembler::BlockAssembler(int block_len) : block_len_(block_len) {
  if (block_len < 1) throw std::invalid_argument("block assembler: block_len must be >= 1");
  buffer_.resize(block_len, kNumChannels);
}

std::optional<Eigen::VectorXf> BlockAssembler::push(const WireFrame& frame) {
  if (expect_valid_ && frame.seq != expected_seq_) {
    ++gaps_;
    frames_discarded_ += static_cast<std::uint64_t>(fill_);
    fill_ = 0;  // a block must be 50 contiguous frames; restart from this one
  }
  expected_seq_ = static_cast<std::uint16_t>(frame.seq + 1);
  expect_valid_ = true;

  for (int c = 0; c < kNumChannels; ++c)
    buffer_(fill_, c) = float(frame.channel(c));
  ++fill_;
  last_timestamp_ms_ = frame.timestamp_ms;
  if (fill_ < block_len_) return std::nullopt;

  Eigen::VectorXf features(block_len_ * kNumChannels);
  for (int c = 0; c < kNumChannels; ++c)
    features.segment(c * block_len_, block_len_) = buffer_.col(c);
  fill_ = 0;
  return features;
}

std::string feedback_line(const FeedbackEvent& event) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%u,%s,%.6f,%.6f,%.6f,%d", event.timestamp_ms,
                std::string(label_name(event.label)).c_str(), event.probabilities[0],
                event.probabilities[1], event.probabilities[2], event.vibrate ? 1 : 0);
  return buf;
}

StreamRun classify_frames(InferenceEngine& engine, std::span<const WireFrame> frames,
                          int block_len, const EventSink& sink) {
  StreamRun run;
  BlockAssembler assembler(block_len);
  for (const auto& frame : frames) {
    ++run.stats.frames_seen;
    if (auto features = assembler.push(frame)) {
      FeedbackEvent ev = make_event(engine, *features, assembler.last_timestamp_ms());
      ++run.stats.events;
      if (sink) sink(ev);
      run.events.push_back(std::move(ev));
    }
  }
  run.stats.gaps = assembler.gaps();
  run.stats.frames_discarded = assembler.frames_discarded();
  return run;
}

StreamRun classify_log(InferenceEngine& engine, const std::filesystem::path& log_path,
                       int block_len, const EventSink& sink) {
  const auto frames = read_frame_log(log_path);
  return classify_frames(engine, frames, block_len, sink);
}

std::size_t serve_frames_udp(const std::vector<PressureFrame>& frames,
                             const ServeOptions& options) {
  if (options.rate_hz <= 0) throw std::invalid_argument("serve: rate must be positive");

  Socket sock(::socket(AF_INET, SOCK_DGRAM, 0));
  if (sock.fd < 0) throw std::runtime_error("serve: cannot create UDP socket");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options.port);
  if (::inet_pton(AF_INET, options.host.c_str(), &addr.sin_addr) != 1)
    throw std::invalid_argument("serve: bad host address " + options.host);

  using clock = std::chrono::steady_clock;
  const auto period =
      std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options.rate_hz));
  auto deadline = clock::now();

  std::uint16_t seq = 0;
  std::size_t sent = 0;
  for (const auto& frame : frames) {
    const auto bytes = encode_frame(frame, seq++);
    std::this_thread::sleep_until(deadline);
    deadline += period;
    if (::sendto(sock.fd, bytes.data(), bytes.size(), 0,
                 reinterpret_cast<const sockaddr*>(&addr), sizeof addr) !=
        static_cast<ssize_t>(bytes.size()))
      throw std::runtime_error("serve: sendto failed");
    ++sent;
  }
  return sent;
}

namespace {

// Fixed-capacity frame queue between the transport reader and the
// classifier. push() blocks when full, so the ingest side never drops.
class BoundedFrameQueue {
 public:
  explicit BoundedFrameQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(const WireFrame& frame) {
    std::unique_lock lock(mutex_);
    space_cv_.wait(lock, [&] { return queue_.size() < capacity_; });
    queue_.push_back(frame);
    data_cv_.notify_one();
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    data_cv_.notify_all();
  }

  std::optional<WireFrame> pop() {
    std::unique_lock lock(mutex_);
    data_cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    WireFrame frame = queue_.front();
    queue_.pop_front();
    space_cv_.notify_one();
    return frame;
  }

 private:
  std::size_t capacity_;
  std::deque<WireFrame> queue_;
  std::mutex mutex_;
  std::condition_variable data_cv_;
  std::condition_variable space_cv_;
  bool closed_ = false;
};

}  // namespace

StreamRun classify_live_udp(InferenceEngine& engine, const LiveOptions& options,
                            const EventSink& sink) {
  Socket sock(::socket(AF_INET, SOCK_DGRAM, 0));
  if (sock.fd < 0) throw std::runtime_error("classify-stream: cannot create UDP socket");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(options.port);
  if (::bind(sock.fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw std::runtime_error("classify-stream: cannot bind UDP port " +
                             std::to_string(options.port));

  timeval tv{};
  tv.tv_sec = static_cast<long>(options.idle_timeout_s);
  tv.tv_usec = static_cast<long>((options.idle_timeout_s - double(tv.tv_sec)) * 1e6);
  ::setsockopt(sock.fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);

  BoundedFrameQueue queue(options.queue_capacity);
  StreamStats reader_stats;

  std::thread reader([&] {
    std::uint8_t buf[64];
    std::uint64_t seen = 0;
    for (;;) {
      const ssize_t n = ::recv(sock.fd, buf, sizeof buf, 0);
      if (n < 0) break;  // idle timeout or shutdown
      ++reader_stats.frames_seen;
      const auto d = decode_frame(std::span(buf, static_cast<std::size_t>(n)));
      if (!d.ok) {
        ++reader_stats.decode_errors;
        continue;
      }
      queue.push(d.frame);
      if (options.max_frames > 0 && ++seen >= options.max_frames) break;
    }
    queue.close();
  });

  StreamRun run;
  BlockAssembler assembler(options.block_len);
  while (auto frame = queue.pop()) {
    if (auto features = assembler.push(*frame)) {
      FeedbackEvent ev = make_event(engine, *features, assembler.last_timestamp_ms());
      ++run.stats.events;
      if (sink) sink(ev);
      run.events.push_back(std::move(ev));
    }
  }
  reader.join();

  run.stats.frames_seen = reader_stats.frames_seen;
  run.stats.decode_errors = reader_stats.decode_errors;
  run.stats.gaps = assembler.gaps();
  run.stats.frames_discarded = assembler.frames_discarded();
  return run;
}

}  // namespace insole
