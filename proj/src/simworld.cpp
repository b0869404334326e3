#include "qwait/simworld.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include "qwait/error.hpp"

namespace qwait {

WorkloadSpec::WorkloadSpec()
    : hour_weights{0.35, 0.3, 0.25, 0.25, 0.25, 0.3, 0.45, 0.7, 1.1, 1.5, 1.7, 1.75,
                   1.6, 1.65, 1.75, 1.7, 1.55, 1.35, 1.1, 0.9, 0.75, 0.6, 0.5, 0.4},
      weekday_weights{1.2, 1.25, 1.25, 1.2, 1.1, 0.55, 0.45},
      size_classes{{1, 1, 0.4}, {2, 4, 0.25}, {5, 16, 0.2}, {17, 64, 0.12}, {65, 128, 0.03}} {}

void WorkloadSpec::validate() const {
  if (!(duration_days >= 0)) throw Error("duration_days must be non-negative");
  if (node_capacity < 1) throw Error("node_capacity must be positive");
  if (!(jobs_per_day >= 0)) throw Error("jobs_per_day must be non-negative");
  if (!(daily_load_sigma >= 0) || daily_load_sigma > 3) throw Error("daily_load_sigma must be in [0, 3]");
  if (!(array_mean_size >= 1) || array_mean_size > 1000) throw Error("array_mean_size must be in [1, 1000]");
  for (double w : hour_weights) {
    if (!(w > 0)) throw Error("hour_weights must all be positive");
  }
  for (double w : weekday_weights) {
    if (!(w > 0)) throw Error("weekday_weights must all be positive");
  }
  if (size_classes.empty()) throw Error("size_classes must not be empty");
  for (const auto& c : size_classes) {
    if (c.lo < 1 || c.hi < c.lo) throw Error("size class ranges must satisfy 1 <= lo <= hi");
    if (c.hi > node_capacity) throw Error("size class upper bound exceeds node_capacity");
    if (!(c.weight > 0)) throw Error("size class weights must be positive");
  }
  if (wtime_min < 1 || wtime_max < wtime_min) throw Error("wall-time range must satisfy 1 <= wtime_min <= wtime_max");
  if (wtime_granularity < 1) throw Error("wtime_granularity must be positive");
  if (!(ratio_a > 0) || !(ratio_b > 0)) throw Error("ratio_a and ratio_b must be positive");
}

namespace {

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  // [0, 1)
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

template <std::size_t N>
std::array<double, N> mean_one(const std::array<double, N>& w) {
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / N;
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = w[i] / mean;
  return out;
}

int log_uniform_int(double u, int lo, int hi) {
  if (lo == hi) return lo;
  const double v = std::exp(std::log(lo) + u * (std::log(hi + 1.0) - std::log(lo)));
  return std::clamp(static_cast<int>(std::floor(v)), lo, hi);
}

}  // namespace

std::vector<SimJob> generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<SimJob> jobs;
  if (spec.jobs_per_day == 0 || spec.duration_days == 0) return jobs;

  const auto hours = mean_one(spec.hour_weights);
  const auto days = mean_one(spec.weekday_weights);
  const double horizon = spec.duration_days * kSecondsPerDay;

  Uniform u(spec.seed);
  // Daily factors come from their own stream so the arrival stream is
  // unchanged when sigma is 0.
  std::vector<double> daily(static_cast<std::size_t>(std::ceil(spec.duration_days)) + 1, 1.0);
  if (spec.daily_load_sigma > 0) {
    Uniform du(derive_seed(spec.seed, 1));
    const double s = spec.daily_load_sigma;
    for (double& f : daily) {
      // Box-Muller.
      const double z = std::sqrt(-2.0 * std::log1p(-du())) * std::cos(2.0 * M_PI * du());
      f = std::exp(s * z - 0.5 * s * s);
    }
  }
  const double peak = *std::max_element(hours.begin(), hours.end()) * *std::max_element(days.begin(), days.end()) *
                      *std::max_element(daily.begin(), daily.end());
  // Arrival events; each carries an array of jobs with mean size array_mean_size.
  const double max_rate = spec.jobs_per_day / spec.array_mean_size * peak / kSecondsPerDay;  // per second
  Uniform au(derive_seed(spec.seed, 2));
  const double stop_p = 1.0 / spec.array_mean_size;

  double class_total = 0;
  for (const auto& c : spec.size_classes) class_total += c.weight;

  double t = 0;
  while (true) {
    t += -std::log1p(-u()) / max_rate;
    if (t >= horizon) break;
    const Instant at = spec.start + static_cast<Instant>(std::floor(t));
    const double rate = hours[hour_of_day(at)] * days[day_of_week(at)] *
                        daily[static_cast<std::size_t>(t / kSecondsPerDay)];
    const double accept = u();
    // Draw the job attributes for every candidate so acceptance does not
    // shift the stream.
    const double pick = u() * class_total;
    const double size_u = u();
    const double wtime_u = u();
    const double ratio_u = u();
    if (accept * peak >= rate) continue;

    const SizeClass* cls = &spec.size_classes.back();
    double acc = 0;
    for (const auto& c : spec.size_classes) {
      acc += c.weight;
      if (pick < acc) {
        cls = &c;
        break;
      }
    }
    SimJob job;
    job.submit = at;
    job.nodes = log_uniform_int(size_u, cls->lo, cls->hi);
    const double raw = std::exp(std::log(static_cast<double>(spec.wtime_min)) +
                                wtime_u * (std::log(static_cast<double>(spec.wtime_max)) -
                                           std::log(static_cast<double>(spec.wtime_min))));
    const Seconds g = spec.wtime_granularity;
    job.req_wtime = std::max<Seconds>(g, static_cast<Seconds>(std::ceil(raw / g)) * g);
    // Kumaraswamy inverse CDF.
    const auto runtime = [&](double v) {
      const double ratio = std::pow(1.0 - std::pow(1.0 - v, 1.0 / spec.ratio_b), 1.0 / spec.ratio_a);
      return std::clamp<Seconds>(std::llround(ratio * job.req_wtime), 0, job.req_wtime);
    };
    job.actual_runtime = runtime(ratio_u);
    jobs.push_back(job);
    if (stop_p < 1.0) {
      // Geometric array size, members sharing shape and submit time.
      const auto extra = static_cast<std::size_t>(std::floor(std::log1p(-au()) / std::log1p(-stop_p)));
      for (std::size_t k = 0; k < extra; ++k) {
        job.actual_runtime = runtime(au());
        jobs.push_back(job);
      }
    }
  }
  char buf[32];
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "j%07zu", i + 1);
    jobs[i].job_id = buf;
  }
  return jobs;
}

namespace {

// Free nodes as a step function of time: steps[i].free holds on
// [steps[i].t, steps[i+1].t), and the last step extends forever.
class Profile {
 public:
  struct Step {
    Instant t;
    int free;
  };

  Profile(Instant now, int free_now, const std::multimap<Instant, int>& releases) {
    steps_.push_back({now, free_now});
    for (const auto& [t, nodes] : releases) {
      if (t <= steps_.back().t) {
        steps_.back().free += nodes;
      } else {
        steps_.push_back({t, steps_.back().free + nodes});
      }
    }
  }

  int free_now() const { return steps_.front().free; }

  // Earliest step time from which `nodes` are free for `duration` seconds.
  Instant find_slot(int nodes, Seconds duration) const {
    std::size_t i = 0;
    while (true) {
      const Instant begin = steps_[i].t;
      std::size_t k = i;
      bool fits = true;
      while (k < steps_.size() && (k == i || steps_[k].t < begin + duration)) {
        if (steps_[k].free < nodes) {
          fits = false;
          break;
        }
        ++k;
      }
      if (fits) return begin;
      i = k + 1;
    }
  }

  void reserve(Instant begin, Seconds duration, int nodes) {
    const Instant end = begin + std::max<Seconds>(duration, 1);
    const std::size_t a = split(begin);
    const std::size_t b = split(end);
    for (std::size_t k = a; k < b; ++k) steps_[k].free -= nodes;
  }

 private:
  std::size_t split(Instant t) {
    auto it = std::lower_bound(steps_.begin(), steps_.end(), t, [](const Step& s, Instant x) { return s.t < x; });
    if (it != steps_.end() && it->t == t) return static_cast<std::size_t>(it - steps_.begin());
    const int free = std::prev(it)->free;
    it = steps_.insert(it, Step{t, free});
    return static_cast<std::size_t>(it - steps_.begin());
  }

  std::vector<Step> steps_;
};

}  // namespace

Trace simulate_backfill(std::vector<SimJob> jobs, int node_capacity, std::string machine) {
  if (node_capacity < 1) throw Error("node_capacity must be positive");
  for (const auto& j : jobs) {
    if (j.nodes < 1) throw Error("job " + j.job_id + " requests no nodes");
    if (j.nodes > node_capacity) {
      throw Error("job " + j.job_id + " requests " + std::to_string(j.nodes) + " nodes but capacity is " +
                  std::to_string(node_capacity));
    }
    if (j.req_wtime < 1) throw Error("job " + j.job_id + " has a non-positive requested wall time");
    if (j.actual_runtime < 0 || j.actual_runtime > j.req_wtime) {
      throw Error("job " + j.job_id + " has an actual runtime outside [0, req_wtime]");
    }
  }
  std::stable_sort(jobs.begin(), jobs.end(), [](const SimJob& a, const SimJob& b) {
    return a.submit != b.submit ? a.submit < b.submit : a.job_id < b.job_id;
  });

  const std::size_t n = jobs.size();
  std::vector<Instant> start(n, 0);

  using Finish = std::pair<Instant, std::size_t>;
  std::priority_queue<Finish, std::vector<Finish>, std::greater<>> finishes;
  std::multimap<Instant, int> reserved_ends;
  std::vector<std::multimap<Instant, int>::iterator> handle(n);
  std::vector<std::size_t> queue;
  std::vector<int> suffix_min;
  std::vector<std::size_t> kept;
  int free = node_capacity;
  std::size_t next_submit = 0;

  while (next_submit < n || !finishes.empty()) {
    Instant now = next_submit < n ? jobs[next_submit].submit : finishes.top().first;
    if (!finishes.empty()) now = std::min(now, finishes.top().first);

    while (!finishes.empty() && finishes.top().first == now) {
      const std::size_t j = finishes.top().second;
      finishes.pop();
      free += jobs[j].nodes;
      reserved_ends.erase(handle[j]);
    }
    while (next_submit < n && jobs[next_submit].submit == now) queue.push_back(next_submit++);

    if (queue.empty() || free == 0) continue;
    suffix_min.assign(queue.size() + 1, node_capacity + 1);
    for (std::size_t q = queue.size(); q-- > 0;) suffix_min[q] = std::min(suffix_min[q + 1], jobs[queue[q]].nodes);
    if (free < suffix_min[0]) continue;

    Profile profile(now, free, reserved_ends);
    kept.clear();
    std::size_t q = 0;
    for (; q < queue.size(); ++q) {
      if (profile.free_now() < suffix_min[q]) break;
      const std::size_t j = queue[q];
      const Instant slot = profile.find_slot(jobs[j].nodes, jobs[j].req_wtime);
      profile.reserve(slot, jobs[j].req_wtime, jobs[j].nodes);
      if (slot == now) {
        start[j] = now;
        free -= jobs[j].nodes;
        handle[j] = reserved_ends.emplace(now + jobs[j].req_wtime, jobs[j].nodes);
        finishes.emplace(now + jobs[j].actual_runtime, j);
      } else {
        kept.push_back(j);
      }
    }
    kept.insert(kept.end(), queue.begin() + static_cast<std::ptrdiff_t>(q), queue.end());
    queue.swap(kept);
  }

  std::vector<JobRecord> records;
  records.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    records.push_back(JobRecord{jobs[j].job_id, jobs[j].submit, start[j], start[j] + jobs[j].actual_runtime,
                                jobs[j].nodes, jobs[j].req_wtime, machine});
  }
  return make_trace(std::move(machine), std::move(records), node_capacity);
}

Trace simulate(const WorkloadSpec& spec) {
  return simulate_backfill(generate_workload(spec), spec.node_capacity, spec.machine);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split_list(std::string s) {
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& key, std::size_t line) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ParseError("invalid value '" + s + "' for " + key + " at line " + std::to_string(line), line, key);
  }
  return v;
}

template <std::size_t N>
std::array<double, N> parse_weights(const std::string& value, const std::string& key, std::size_t line) {
  const auto items = split_list(value);
  if (items.size() != N) {
    throw ParseError(key + " needs " + std::to_string(N) + " values at line " + std::to_string(line), line, key);
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<double>(items[i], key, line);
  return out;
}

}  // namespace

WorkloadSpec parse_workload_spec(std::istream& in) {
  WorkloadSpec spec;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty() || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value at line " + std::to_string(line), line);
    }
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = unquote(trim(std::string_view(text).substr(eq + 1)));
    try {
      if (key == "machine") {
        spec.machine = value;
      } else if (key == "start") {
        spec.start = parse_instant(value);
      } else if (key == "duration_days") {
        spec.duration_days = parse_number<double>(value, key, line);
      } else if (key == "node_capacity") {
        spec.node_capacity = parse_number<int>(value, key, line);
      } else if (key == "jobs_per_day") {
        spec.jobs_per_day = parse_number<double>(value, key, line);
      } else if (key == "hour_weights") {
        spec.hour_weights = parse_weights<24>(value, key, line);
      } else if (key == "daily_load_sigma") {
        spec.daily_load_sigma = parse_number<double>(value, key, line);
      } else if (key == "array_mean_size") {
        spec.array_mean_size = parse_number<double>(value, key, line);
      } else if (key == "weekday_weights") {
        spec.weekday_weights = parse_weights<7>(value, key, line);
      } else if (key == "size_classes") {
        spec.size_classes.clear();
        for (const auto& item : split_list(value)) {
          const auto dash = item.find('-');
          const auto colon = item.find(':');
          SizeClass c;
          if (colon == std::string::npos) {
            throw ParseError("size class '" + item + "' must look like lo-hi:weight at line " + std::to_string(line),
                             line, key);
          }
          const std::string range = item.substr(0, colon);
          if (dash == std::string::npos || dash > colon) {
            c.lo = c.hi = parse_number<int>(range, key, line);
          } else {
            c.lo = parse_number<int>(range.substr(0, dash), key, line);
            c.hi = parse_number<int>(range.substr(dash + 1), key, line);
          }
          c.weight = parse_number<double>(item.substr(colon + 1), key, line);
          spec.size_classes.push_back(c);
        }
      } else if (key == "wtime_min") {
        spec.wtime_min = parse_duration(value);
      } else if (key == "wtime_max") {
        spec.wtime_max = parse_duration(value);
      } else if (key == "wtime_granularity") {
        spec.wtime_granularity = parse_duration(value);
      } else if (key == "ratio_a") {
        spec.ratio_a = parse_number<double>(value, key, line);
      } else if (key == "ratio_b") {
        spec.ratio_b = parse_number<double>(value, key, line);
      } else if (key == "seed") {
        spec.seed = parse_number<std::uint64_t>(value, key, line);
      } else {
        throw ParseError("unknown key '" + key + "' at line " + std::to_string(line), line, key);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(std::string(e.what()) + " (key " + key + " at line " + std::to_string(line) + ")", line, key);
    }
  }
  spec.validate();
  return spec;
}

WorkloadSpec load_workload_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload spec " + path.string());
  return parse_workload_spec(in);
}

void write_workload_spec(std::ostream& out, const WorkloadSpec& spec) {
  auto list = [&](const auto& values) {
    std::string s = "[";
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      s += (i ? ", " : "") + std::string(buf);
    }
    return s + "]";
  };
  char buf[64];
  out << "machine = \"" << spec.machine << "\"\n";
  out << "start = " << spec.start << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.duration_days);
  out << "duration_days = " << buf << "\n";
  out << "node_capacity = " << spec.node_capacity << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.jobs_per_day);
  out << "jobs_per_day = " << buf << "\n";
  out << "hour_weights = " << list(spec.hour_weights) << "\n";
  out << "weekday_weights = " << list(spec.weekday_weights) << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.daily_load_sigma);
  out << "daily_load_sigma = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.array_mean_size);
  out << "array_mean_size = " << buf << "\n";
  out << "size_classes = [";
  for (std::size_t i = 0; i < spec.size_classes.size(); ++i) {
    const auto& c = spec.size_classes[i];
    std::snprintf(buf, sizeof buf, "%.17g", c.weight);
    out << (i ? ", " : "") << c.lo << '-' << c.hi << ':' << buf;
  }
  out << "]\n";
  out << "wtime_min = " << spec.wtime_min << "\n";
  out << "wtime_max = " << spec.wtime_max << "\n";
  out << "wtime_granularity = " << spec.wtime_granularity << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.ratio_a);
  out << "ratio_a = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec.ratio_b);
  out << "ratio_b = " << buf << "\n";
  out << "seed = " << spec.seed << "\n";
}

}  // namespace qwait
