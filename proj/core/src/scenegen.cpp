#include "catse/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <numeric>

#include "catse/errors.hpp"
#include "catse/wav.hpp"

namespace catse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBackgroundRms = 0.01;
constexpr double kPeakLimit = 0.95;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void normalize_rms(std::vector<double>& x) {
  const double r = rms(x);
  if (r > 0.0) {
    for (auto& v : x) v /= r;
  }
}

// RBJ band-pass biquad (constant skirt gain), applied in place.
void bandpass(std::vector<double>& x, double center_hz, double q, double rate) {
  const double w0 = kTwoPi * center_hz / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (auto& v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::vector<double> harmonic_stack(std::size_t n, std::size_t variant, std::mt19937_64& rng,
                                   double rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f0 = 110.0 * std::pow(2.0, 0.45 * static_cast<double>(variant)) *
                    (1.0 + 0.02 * (unit(rng) - 0.5));
  const std::size_t partials = 4 + variant % 3;
  const double vibrato_hz = 4.0 + unit(rng);
  std::vector<double> phases(partials);
  for (auto& p : phases) p = kTwoPi * unit(rng);
  std::vector<double> out(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + 0.006 * std::sin(kTwoPi * vibrato_hz * t));
    phase += kTwoPi * f / rate;
    double v = 0.0;
    for (std::size_t p = 0; p < partials; ++p) {
      const double harmonic = static_cast<double>(p + 1);
      if (f * harmonic < 0.45 * rate) v += std::sin(harmonic * phase + phases[p]) / harmonic;
    }
    out[i] = v;
  }
  return out;
}

std::vector<double> chirp(std::size_t n, std::size_t variant, std::mt19937_64& rng, double rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f_lo = 300.0 + 250.0 * static_cast<double>(variant);
  const double f_hi = std::min(3.0 * f_lo, 0.45 * rate);
  const double period = 0.4 + 0.15 * static_cast<double>(variant);
  const bool exponential = variant % 2 == 1;
  const double offset = period * unit(rng);
  std::vector<double> out(n);
  double phase = kTwoPi * unit(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate + offset;
    const double u = std::fmod(t, period) / period;
    const double f = exponential ? f_lo * std::pow(f_hi / f_lo, u) : f_lo + (f_hi - f_lo) * u;
    phase += kTwoPi * f / rate;
    out[i] = std::sin(phase);
  }
  return out;
}

std::vector<double> am_noise(std::size_t n, std::size_t variant, std::mt19937_64& rng,
                             double rate) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f_am = 3.0 + 2.5 * static_cast<double>(variant);
  const double phi = kTwoPi * unit(rng);
  std::vector<double> out(n);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = noise(rng);
    const double high = w - prev;  // first difference tilts the noise upwards
    prev = w;
    const double t = static_cast<double>(i) / rate;
    out[i] = high * (1.0 + 0.9 * std::sin(kTwoPi * f_am * t + phi));
  }
  return out;
}

std::vector<double> band_noise(std::size_t n, std::size_t variant, std::mt19937_64& rng,
                               double rate) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = noise(rng);
  const double center = 400.0 * std::pow(1.35, static_cast<double>(variant));
  bandpass(out, std::min(center, 0.4 * rate), 4.0, rate);
  bandpass(out, std::min(center, 0.4 * rate), 4.0, rate);
  return out;
}

std::vector<double> click_train(std::size_t n, std::size_t variant, std::mt19937_64& rng,
                                double rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double click_rate = 4.0 + 3.0 * static_cast<double>(variant);
  const double ring_hz = 800.0 + 400.0 * static_cast<double>(variant);
  const double decay_s = 0.005;
  const double interval = rate / click_rate;
  double next = interval * unit(rng);
  std::vector<double> out(n, 0.0);
  const auto ring_len = static_cast<std::size_t>(6.0 * decay_s * rate);
  while (next < static_cast<double>(n)) {
    const auto start = static_cast<std::size_t>(next);
    const double amp = 0.7 + 0.3 * unit(rng);
    for (std::size_t k = 0; k < ring_len && start + k < n; ++k) {
      const double t = static_cast<double>(k) / rate;
      out[start + k] += amp * std::exp(-t / decay_s) * std::sin(kTwoPi * ring_hz * t);
    }
    next += interval * (0.9 + 0.2 * unit(rng));
  }
  return out;
}

std::size_t to_samples(double seconds, std::uint32_t rate) {
  return static_cast<std::size_t>(std::llround(seconds * static_cast<double>(rate)));
}

// Foreground event waveform (RMS 1 over its span) for one record entry.
std::vector<double> event_source(std::size_t class_id, std::size_t samples, std::uint64_t seed,
                                 std::uint32_t rate, const SourcePool* pool) {
  if (pool == nullptr) return synth_source(class_id, static_cast<double>(samples) / rate, seed, rate);
  auto it = pool->clips.find(class_id);
  if (it == pool->clips.end() || it->second.empty()) {
    throw DataError("corpus has no clips for class " + std::to_string(class_id));
  }
  const auto& clip = it->second[seed % it->second.size()];
  if (clip.size() < samples) throw DataError("corpus clip shorter than the requested event");
  const std::size_t start = static_cast<std::size_t>((seed >> 20) % (clip.size() - samples + 1));
  std::vector<double> out(clip.begin() + static_cast<std::ptrdiff_t>(start),
                          clip.begin() + static_cast<std::ptrdiff_t>(start + samples));
  normalize_rms(out);
  return out;
}

}  // namespace

std::size_t SceneSpec::scene_samples() const { return to_samples(scene_duration_s, sample_rate); }

void SceneSpec::validate(std::size_t n_classes) const {
  if (min_fg_classes == 0 || min_fg_classes > max_fg_classes) {
    throw UsageError("scene spec: need 1 <= min_fg_classes <= max_fg_classes");
  }
  if (max_fg_classes > n_classes) {
    throw UsageError("scene spec: " + std::to_string(max_fg_classes) +
                     " foreground classes requested from a vocabulary of " +
                     std::to_string(n_classes));
  }
  if (!(min_fg_duration_s > 0.0 && min_fg_duration_s <= max_fg_duration_s &&
        max_fg_duration_s <= scene_duration_s)) {
    throw UsageError("scene spec: need 0 < min duration <= max duration <= scene duration");
  }
  if (!(min_snr_db <= max_snr_db)) throw UsageError("scene spec: min SNR exceeds max SNR");
  if (sample_rate != kSampleRate) throw UsageError("scene spec: only 16 kHz is supported");
}

std::string_view to_string(TargetMode mode) {
  return mode == TargetMode::single ? "single" : "multi";
}

TargetMode parse_target_mode(std::string_view text) {
  if (text == "single") return TargetMode::single;
  if (text == "multi") return TargetMode::multi;
  throw UsageError("unknown target mode '" + std::string(text) + "' (expected multi or single)");
}

std::vector<double> synth_source(std::size_t class_id, double duration_s, std::uint64_t seed,
                                 std::uint32_t sample_rate) {
  const std::size_t n = to_samples(duration_s, sample_rate);
  std::mt19937_64 rng(mix_seed(seed, class_id));
  const std::size_t variant = class_id / 5;
  const double rate = static_cast<double>(sample_rate);
  std::vector<double> out;
  switch (class_id % 5) {
    case 0: out = harmonic_stack(n, variant, rng, rate); break;
    case 1: out = chirp(n, variant, rng, rate); break;
    case 2: out = am_noise(n, variant, rng, rate); break;
    case 3: out = band_noise(n, variant, rng, rate); break;
    default: out = click_train(n, variant, rng, rate); break;
  }
  normalize_rms(out);
  return out;
}

std::vector<double> synth_background(std::size_t bg_id, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 1000 + bg_id));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(samples);
  const std::size_t variant = bg_id % kBackgroundVariants;
  // Paul Kellet's economy pink filter, optionally followed by extra colouring.
  double b0 = 0, b1 = 0, b2 = 0, brown = 0, lp = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double w = noise(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    const double pink = b0 + b1 + b2 + w * 0.1848;
    switch (variant) {
      case 0:
        out[i] = pink;
        break;
      case 1:
        brown = 0.995 * brown + 0.1 * w;
        out[i] = brown + 0.3 * pink;
        break;
      case 2:
        lp = 0.9 * lp + 0.1 * pink;
        out[i] = lp * (1.0 + 0.3 * std::sin(kTwoPi * 0.25 * static_cast<double>(i) / kSampleRate));
        break;
      default:
        out[i] = pink + 0.5 * std::sin(kTwoPi * 60.0 * static_cast<double>(i) / kSampleRate);
        break;
    }
  }
  normalize_rms(out);
  return out;
}

SourcePool ingest_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("corpus root " + root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<std::string> names;
  for (const auto& d : class_dirs) names.push_back(d.filename().string());

  SourcePool pool;
  pool.vocabulary = ClassVocabulary(names);
  std::vector<std::string> failures;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c]))
      if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        auto wav = read_wav(f);
        if (rms(wav.samples) == 0.0) throw DataError(f.string() + ": silent clip");
        normalize_rms(wav.samples);
        pool.clips[c].push_back(std::move(wav.samples));
      } catch (const DataError& e) {
        failures.emplace_back(e.what());
      }
    }
  }
  if (!failures.empty()) {
    std::string message = "corpus contains unusable files:";
    for (const auto& f : failures) message += "\n  " + f;
    throw DataError(message);
  }
  if (pool.empty()) throw DataError("corpus at " + root.string() + " contains no clips (empty pool)");
  return pool;
}

MixtureExample render_scene(const SceneRecord& record, const SceneSpec& spec,
                            std::size_t n_classes, const SourcePool* pool) {
  const std::size_t total = spec.scene_samples();
  const std::size_t events = record.classes.size();
  if (record.offsets_s.size() != events || record.durations_s.size() != events ||
      record.gains.size() != events || record.source_seeds.size() != events ||
      record.snrs_db.size() != events) {
    throw DataError("scene record " + record.scene_id + " has inconsistent field lengths");
  }
  MixtureExample ex;
  ex.record = record;
  ex.present.assign(n_classes, 0);
  ex.background = synth_background(record.bg_id, total, mix_seed(record.seed, 77));
  for (auto& v : ex.background) v *= record.bg_gain;
  for (std::size_t e = 0; e < events; ++e) {
    const std::size_t cls = record.classes[e];
    if (cls >= n_classes) throw DataError("scene record references class " + std::to_string(cls));
    const std::size_t offset = to_samples(record.offsets_s[e], spec.sample_rate);
    const std::size_t len = to_samples(record.durations_s[e], spec.sample_rate);
    if (offset + len > total) throw DataError("scene event extends past the scene end");
    const auto src = event_source(cls, len, record.source_seeds[e], spec.sample_rate, pool);
    std::vector<double> stem(total, 0.0);
    for (std::size_t i = 0; i < len; ++i) stem[offset + i] = record.gains[e] * src[i];
    ex.stems.emplace(cls, std::move(stem));
    ex.present[cls] = 1;
  }
  ex.mixture = ex.background;
  for (const auto& [cls, stem] : ex.stems)
    for (std::size_t i = 0; i < total; ++i) ex.mixture[i] += stem[i];
  return ex;
}

MixtureExample compose_scene(const SceneSpec& spec, const ClassVocabulary& vocabulary,
                             const SourcePool* pool) {
  const std::size_t n_classes = vocabulary.size();
  spec.validate(n_classes);
  const std::size_t total = spec.scene_samples();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneRecord rec;
  rec.seed = spec.seed;
  std::uniform_int_distribution<std::size_t> count_dist(spec.min_fg_classes, spec.max_fg_classes);
  const std::size_t n_fg = count_dist(rng);
  std::vector<std::size_t> order(n_classes);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_fg; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_classes - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  rec.classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fg));
  std::sort(rec.classes.begin(), rec.classes.end());

  for (std::size_t cls : rec.classes) {
    const double dur = spec.min_fg_duration_s + (spec.max_fg_duration_s - spec.min_fg_duration_s) * unit(rng);
    std::size_t len = to_samples(dur, spec.sample_rate);
    const std::uint64_t source_seed = rng();
    if (pool != nullptr) {
      auto it = pool->clips.find(cls);
      if (it == pool->clips.end() || it->second.empty()) {
        throw DataError("corpus has no clips for class '" + vocabulary.name(cls) + "'");
      }
      len = std::min(len, it->second[source_seed % it->second.size()].size());
    }
    len = std::min(len, total);
    const std::size_t max_offset = total - len;
    const auto offset = static_cast<std::size_t>(unit(rng) * static_cast<double>(max_offset + 1));
    rec.offsets_s.push_back(static_cast<double>(std::min(offset, max_offset)) / spec.sample_rate);
    rec.durations_s.push_back(static_cast<double>(len) / spec.sample_rate);
    rec.snrs_db.push_back(spec.min_snr_db + (spec.max_snr_db - spec.min_snr_db) * unit(rng));
    rec.source_seeds.push_back(source_seed);
  }
  rec.bg_id = static_cast<std::size_t>(rng() % kBackgroundVariants);

  // Gains against the unit-RMS background over each event's span, then a
  // common scale so the mixture peak stays below kPeakLimit.
  const auto bg = synth_background(rec.bg_id, total, mix_seed(rec.seed, 77));
  std::vector<double> raw_gains;
  for (std::size_t e = 0; e < rec.classes.size(); ++e) {
    const std::size_t offset = to_samples(rec.offsets_s[e], spec.sample_rate);
    const std::size_t len = to_samples(rec.durations_s[e], spec.sample_rate);
    const double bg_rms = rms(std::span<const double>(bg).subspan(offset, len));
    raw_gains.push_back(std::pow(10.0, rec.snrs_db[e] / 20.0) * bg_rms);
  }
  std::vector<double> mix = bg;
  for (std::size_t e = 0; e < rec.classes.size(); ++e) {
    const std::size_t offset = to_samples(rec.offsets_s[e], spec.sample_rate);
    const std::size_t len = to_samples(rec.durations_s[e], spec.sample_rate);
    const auto src = event_source(rec.classes[e], len, rec.source_seeds[e], spec.sample_rate, pool);
    for (std::size_t i = 0; i < len; ++i) mix[offset + i] += raw_gains[e] * src[i];
  }
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v * kBackgroundRms));
  const double common = kBackgroundRms * (peak > kPeakLimit ? kPeakLimit / peak : 1.0);
  rec.bg_gain = common;
  for (double g : raw_gains) rec.gains.push_back(g * common);
  return render_scene(rec, spec, n_classes, pool);
}

TargetDraw select_targets(const MixtureExample& example, const MultiHot& selection) {
  if (!is_subset(selection, example.present)) {
    throw UsageError("target selection includes classes absent from the scene");
  }
  if (popcount(selection) == 0) throw UsageError("target selection is empty");
  TargetDraw draw;
  draw.hint = selection;
  draw.reference.assign(example.mixture.size(), 0.0);
  for (std::size_t cls : active_indices(selection)) {
    const auto& stem = example.stems.at(cls);
    for (std::size_t i = 0; i < stem.size(); ++i) draw.reference[i] += stem[i];
  }
  return draw;
}

TargetDraw draw_n_targets(const MixtureExample& example, std::size_t count, std::mt19937_64& rng) {
  auto present = active_indices(example.present);
  if (count == 0 || count > present.size()) {
    throw UsageError("cannot draw " + std::to_string(count) + " targets from " +
                     std::to_string(present.size()) + " present classes");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, present.size() - 1);
    std::swap(present[i], present[pick(rng)]);
  }
  present.resize(count);
  return select_targets(example, multi_hot(example.present.size(), present));
}

TargetDraw draw_targets(const MixtureExample& example, TargetMode mode, std::mt19937_64& rng,
                        std::size_t max_targets) {
  const std::size_t available = popcount(example.present);
  std::size_t count = 1;
  if (mode == TargetMode::multi) {
    std::uniform_int_distribution<std::size_t> dist(1, std::max<std::size_t>(1, std::min(max_targets, available)));
    count = dist(rng);
  }
  return draw_n_targets(example, count, rng);
}

std::string manifest_line(const SceneRecord& r) {
  nlohmann::json j;
  j["scene_id"] = r.scene_id;
  j["seed"] = r.seed;
  j["classes"] = r.classes;
  j["offsets_s"] = r.offsets_s;
  j["durations_s"] = r.durations_s;
  j["snrs_db"] = r.snrs_db;
  j["gains"] = r.gains;
  j["source_seeds"] = r.source_seeds;
  j["bg_id"] = r.bg_id;
  j["bg_gain"] = r.bg_gain;
  return j.dump();
}

SceneRecord parse_manifest_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SceneRecord r;
    r.scene_id = j.at("scene_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.classes = j.at("classes").get<std::vector<std::size_t>>();
    r.offsets_s = j.at("offsets_s").get<std::vector<double>>();
    r.durations_s = j.at("durations_s").get<std::vector<double>>();
    r.snrs_db = j.at("snrs_db").get<std::vector<double>>();
    r.gains = j.at("gains").get<std::vector<double>>();
    r.source_seeds = j.at("source_seeds").get<std::vector<std::uint64_t>>();
    r.bg_id = j.at("bg_id").get<std::size_t>();
    r.bg_gain = j.at("bg_gain").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest record: ") + e.what());
  }
}

}  // namespace catse
