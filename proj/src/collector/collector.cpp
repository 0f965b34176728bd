// Copyright 2026 The Observatory Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "obs/collector/collector.hpp"

#include <time.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "obs/core/error.hpp"
#include "obs/core/exposition.hpp"

namespace obs::collector {

void PowerModel::Validate() const {
  if (!(p_idle >= 0) || !(p_max >= p_idle)) {
    throw Error(ErrorCode::kInvalidArgument, "power model needs 0 <= p_idle <= p_max");
  }
  if (!(exponent > 0)) throw Error(ErrorCode::kInvalidArgument, "power model exponent must be > 0");
}

double EstimatePower(double utilization, const PowerModel& model) {
  if (!(utilization >= 0 && utilization <= 1)) {
    throw Error(ErrorCode::kOutOfRange,
                "utilization " + FormatDouble(utilization) + " outside [0, 1]");
  }
  double scaled = model.exponent == 1.0 ? utilization : std::pow(utilization, model.exponent);
  return model.p_idle + (model.p_max - model.p_idle) * scaled;
}

double IntegrateEnergy(std::span<const PowerPoint> points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::kInsufficientPoints, "energy integral needs at least 2 points");
  }
  double joules = 0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i + 1].t <= points[i].t) {
      throw Error(ErrorCode::kNonMonotonicTime, "power timestamps must strictly increase");
    }
    double dt = static_cast<double>(points[i + 1].t - points[i].t) / 1000.0;
    joules += dt * (points[i].watts + points[i + 1].watts) / 2;
  }
  return joules;
}

ReplayProvider ReplayProvider::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromText(ss.str());
}

ReplayProvider ReplayProvider::FromText(std::string_view text) {
  ReplayProvider p;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = TrimView(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (trimmed == "error") {
      p.rows_.push_back(std::nullopt);
      continue;
    }
    std::istringstream fields{std::string(trimmed)};
    ResourceSnapshot s;
    if (!(fields >> s.timestamp >> s.cpu_utilization >> s.memory_used >> s.memory_total >>
          s.process_cpu_seconds)) {
      throw Error(ErrorCode::kParseError, "replay line " + std::to_string(line_no) +
                                              ": expected 5 numeric fields");
    }
    if (!(fields >> s.cores)) s.cores = 1;
    p.rows_.push_back(s);
  }
  return p;
}

ResourceSnapshot ReplayProvider::Read() {
  if (next_ >= rows_.size()) throw Error(ErrorCode::kSourceUnavailable, "replay exhausted");
  const auto& row = rows_[next_++];
  if (!row) throw Error(ErrorCode::kSourceUnavailable, "replayed provider failure");
  return *row;
}

ProcProvider::ProcProvider(int pid, Clock clock) : pid_(pid), clock_(std::move(clock)) {}

ResourceSnapshot ProcProvider::Read() {
  ResourceSnapshot s;
  s.timestamp = clock_();
  s.cores = std::max(1, static_cast<int>(::sysconf(_SC_NPROCESSORS_ONLN)));

  auto read_cpu = [](std::uint64_t& busy, std::uint64_t& total) {
    std::ifstream stat("/proc/stat");
    std::string tag;
    std::uint64_t user, nice, system, idle, iowait = 0, irq = 0, softirq = 0, steal = 0;
    if (!(stat >> tag >> user >> nice >> system >> idle) || tag != "cpu") {
      throw Error(ErrorCode::kSourceUnavailable, "cannot read /proc/stat");
    }
    stat >> iowait >> irq >> softirq >> steal;
    total = user + nice + system + idle + iowait + irq + softirq + steal;
    busy = total - idle - iowait;
  };
  std::uint64_t busy, total;
  read_cpu(busy, total);
  if (last_total_ == 0) {
    // No previous reading: take a short second one to get a delta.
    last_busy_ = busy;
    last_total_ = total;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    read_cpu(busy, total);
  }
  if (total > last_total_) {
    s.cpu_utilization = static_cast<double>(busy - last_busy_) /
                        static_cast<double>(total - last_total_) * s.cores;
  }
  last_busy_ = busy;
  last_total_ = total;

  std::ifstream meminfo("/proc/meminfo");
  std::string key, unit;
  double value;
  double mem_total = -1, mem_available = -1;
  while (meminfo >> key >> value >> unit) {
    if (key == "MemTotal:") mem_total = value * 1024;
    if (key == "MemAvailable:") mem_available = value * 1024;
  }
  if (mem_total < 0 || mem_available < 0) {
    throw Error(ErrorCode::kSourceUnavailable, "cannot read /proc/meminfo");
  }
  s.memory_total = mem_total;
  s.memory_used = mem_total - mem_available;

  std::string pid = pid_ > 0 ? std::to_string(pid_) : "self";
  std::ifstream pstat("/proc/" + pid + "/stat");
  std::string content((std::istreambuf_iterator<char>(pstat)), {});
  auto close = content.rfind(')');
  if (close == std::string::npos) {
    throw Error(ErrorCode::kSourceUnavailable, "cannot read /proc/" + pid + "/stat");
  }
  // Fields after the command name start at field 3 (state); utime and stime
  // are fields 14 and 15.
  std::istringstream rest(content.substr(close + 2));
  std::string field;
  std::uint64_t utime = 0, stime = 0;
  for (int i = 3; i <= 15 && rest >> field; ++i) {
    if (i == 14) utime = std::stoull(field);
    if (i == 15) stime = std::stoull(field);
  }
  s.process_cpu_seconds =
      static_cast<double>(utime + stime) / static_cast<double>(::sysconf(_SC_CLK_TCK));
  return s;
}

CollectorOptions CollectorOptions::FromConfig(const ConfigFile& config) {
  CollectorOptions o;
  char hostname[256] = "localhost";
  ::gethostname(hostname, sizeof(hostname) - 1);
  o.host = config.GetOr("collector.host", hostname);
  o.interval_seconds = static_cast<int>(config.GetInt("collector.interval_seconds", 5));
  if (o.interval_seconds < 1 || o.interval_seconds > 300) {
    throw Error(ErrorCode::kValidationFailed, "collector.interval_seconds must be in [1, 300]");
  }
  o.power.p_idle = config.GetDouble("collector.power_model.p_idle_watts", o.power.p_idle);
  o.power.p_max = config.GetDouble("collector.power_model.p_max_watts", o.power.p_max);
  o.power.exponent = config.GetDouble("collector.power_model.exponent", o.power.exponent);
  try {
    o.power.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kValidationFailed, std::string("collector.power_model: ") + e.what());
  }
  o.push_url = config.GetOr("collector.push_url", "");
  o.listen_addr = config.GetOr("collector.listen_addr", "");
  return o;
}

namespace {

double ProcessCpuSeconds() {
  timespec ts{};
  ::clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

MetricSample Make(const std::string& name, const LabelMap& labels, double value, TimestampMs t,
                  CanonicalUnit unit, MetricKind kind) {
  MetricSample s;
  s.key = SeriesKey::Canonicalize(name, labels);
  s.value = value;
  s.timestamp = t;
  s.unit = Unit{unit, std::string(CanonicalSymbol(unit))};
  s.kind = kind;
  return s;
}

}  // namespace

Collector::Collector(SnapshotProvider& provider, CollectorOptions options)
    : provider_(provider), options_(std::move(options)) {
  options_.power.Validate();
}

std::vector<MetricSample> Collector::SampleResources() {
  ResourceSnapshot snap = provider_.Read();
  const LabelMap labels = {{"collector", "self"}, {"host", options_.host}};
  const TimestampMs t = snap.timestamp;
  std::vector<MetricSample> out;
  out.push_back(Make("cpu_utilization", labels, snap.cpu_utilization, t, CanonicalUnit::kRatio,
                     MetricKind::kGauge));
  out.push_back(Make("memory_used_bytes", labels, snap.memory_used, t, CanonicalUnit::kBytes,
                     MetricKind::kGauge));
  out.push_back(Make("process_cpu_seconds", labels, snap.process_cpu_seconds, t,
                     CanonicalUnit::kSeconds, MetricKind::kCounter));

  try {
    double watts = EstimatePower(snap.cpu_utilization / std::max(1, snap.cores), options_.power);
    PowerPoint point{t, watts};
    if (last_power_ && last_power_->t < t) {
      PowerPoint pair[] = {*last_power_, point};
      energy_joules_ += IntegrateEnergy(pair);
    }
    last_power_ = point;
    out.push_back(Make("estimated_power_watts", labels, watts, t, CanonicalUnit::kWatts,
                       MetricKind::kGauge));
    out.push_back(Make("estimated_energy_joules", labels, energy_joules_, t,
                       CanonicalUnit::kJoules, MetricKind::kCounter));
  } catch (const Error& e) {
    metrics_.Add("collector_power_errors_total");
    spdlog::warn("collector: skipping power estimate: {}", e.what());
  }

  samples_total_ += static_cast<double>(out.size() + 2);
  out.push_back(Make("collector_cpu_seconds", labels, ProcessCpuSeconds(), t,
                     CanonicalUnit::kSeconds, MetricKind::kCounter));
  out.push_back(Make("collector_samples_total", labels, samples_total_, t, CanonicalUnit::kCount,
                     MetricKind::kCounter));
  return out;
}

std::vector<MetricSample> Collector::Tick() {
  std::vector<MetricSample> batch;
  try {
    batch = SampleResources();
  } catch (const Error& e) {
    metrics_.Add("collector_source_errors_total");
    spdlog::warn("collector: {} ({}); skipping tick", e.what(), ErrorCodeName(e.code()));
    return batch;
  }
  std::string text;
  for (const auto& s : batch) text += FormatExpositionLine(s);
  auto published = std::make_shared<const std::string>(std::move(text));
  std::lock_guard lock(publish_mu_);
  latest_ = std::move(published);
  return batch;
}

std::shared_ptr<const std::string> Collector::LatestExposition() const {
  std::lock_guard lock(publish_mu_);
  return latest_;
}

bool Collector::Push(const std::vector<MetricSample>& batch, const PostFn& post,
                     const SleepFn& sleep) {
  if (batch.empty()) return true;
  std::string body;
  for (const auto& s : batch) body += FormatExpositionLine(s);
  static constexpr std::chrono::milliseconds kBackoff[] = {
      std::chrono::seconds(1), std::chrono::seconds(2), std::chrono::seconds(4)};
  for (int attempt = 0;; ++attempt) {
    bool ok = false;
    try {
      ok = post(body);
    } catch (const std::exception& e) {
      spdlog::warn("collector: push failed: {}", e.what());
    }
    if (ok) return true;
    if (attempt == 3) break;
    if (sleep) {
      sleep(kBackoff[attempt]);
    } else {
      std::this_thread::sleep_for(kBackoff[attempt]);
    }
  }
  metrics_.Add("collector_dropped_total", static_cast<double>(batch.size()));
  spdlog::error("collector: dropped batch of {} samples after retries", batch.size());
  return false;
}

struct PullServer::Impl {
  httplib::Server server;
  std::thread thread;
};

PullServer::PullServer(const Collector& collector) : impl_(std::make_unique<Impl>()) {
  impl_->server.Get("/metrics", [&collector](const httplib::Request&, httplib::Response& res) {
    auto text = collector.LatestExposition();
    res.set_content(*text, "text/plain; charset=utf-8");
  });
}

PullServer::~PullServer() { Stop(); }

int PullServer::Start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void PullServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace obs::collector
