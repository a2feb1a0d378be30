#include "ttplan/device_profile.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ttplan/index_math.hpp"

namespace ttplan {

namespace {

DeviceProfile make(std::string name, int n_sm, double bw, double freq, double delta, double baselat,
                   double shlat, double ac) {
  DeviceProfile p;
  p.name = std::move(name);
  p.n_sm = n_sm;
  p.mem_bw = bw;
  p.freq = freq;
  p.delta = delta;
  p.mem_baselat = baselat;
  p.shmem_lat = shlat;
  p.cycles_ac = ac;
  return p;
}

using Setter = std::function<void(DeviceProfile&, const std::string&)>;

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InputError("profile key '" + key + "': not a number: " + v);
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"name", [](DeviceProfile& p, const std::string& v) { p.name = v; }},
      {"n_sm", [](DeviceProfile& p, const std::string& v) { p.n_sm = static_cast<int>(to_double("n_sm", v)); }},
      {"mem_bw", [](DeviceProfile& p, const std::string& v) { p.mem_bw = to_double("mem_bw", v); }},
      {"freq", [](DeviceProfile& p, const std::string& v) { p.freq = to_double("freq", v); }},
      {"delta", [](DeviceProfile& p, const std::string& v) { p.delta = to_double("delta", v); }},
      {"mem_baselat", [](DeviceProfile& p, const std::string& v) { p.mem_baselat = to_double("mem_baselat", v); }},
      {"shmem_lat", [](DeviceProfile& p, const std::string& v) { p.shmem_lat = to_double("shmem_lat", v); }},
      {"cycles_ac", [](DeviceProfile& p, const std::string& v) { p.cycles_ac = to_double("cycles_ac", v); }},
      {"shmem_capacity",
       [](DeviceProfile& p, const std::string& v) { p.shmem_capacity = static_cast<unsigned>(to_double("shmem_capacity", v)); }},
      {"bank_count",
       [](DeviceProfile& p, const std::string& v) { p.bank_count = static_cast<unsigned>(to_double("bank_count", v)); }},
      {"bank_width",
       [](DeviceProfile& p, const std::string& v) { p.bank_width = static_cast<unsigned>(to_double("bank_width", v)); }},
      {"tran_size",
       [](DeviceProfile& p, const std::string& v) { p.tran_size = static_cast<unsigned>(to_double("tran_size", v)); }},
      {"l2_line", [](DeviceProfile& p, const std::string& v) { p.l2_line = static_cast<unsigned>(to_double("l2_line", v)); }},
      {"cache_hit", [](DeviceProfile& p, const std::string& v) { p.cache_hit = to_double("cache_hit", v); }},
      {"max_warps_per_sm",
       [](DeviceProfile& p, const std::string& v) { p.max_warps_per_sm = static_cast<int>(to_double("max_warps_per_sm", v)); }},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

DeviceProfile apply(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string base = "kepler-k20x";
  for (const auto& [k, v] : kv)
    if (k == "base") base = v;
  DeviceProfile p = builtin_profile(base);
  for (const auto& [k, v] : kv) {
    if (k == "base") continue;
    auto it = setters().find(k);
    if (it == setters().end()) throw InputError("unknown profile key '" + k + "'");
    it->second(p, v);
  }
  p.validate();
  return p;
}

}  // namespace

void DeviceProfile::validate() const {
  if (n_sm <= 0 || mem_bw <= 0 || freq <= 0 || delta <= 0 || mem_baselat <= 0 || shmem_lat <= 0 ||
      cycles_ac < 0 || shmem_capacity == 0 || bank_count == 0 || bank_width == 0 || tran_size == 0 ||
      l2_line == 0 || max_warps_per_sm <= 0)
    throw InputError("device profile '" + name + "' has a non-positive parameter");
  if (cache_hit < 0.0 || cache_hit > 1.0) throw InputError("cache_hit must lie in [0, 1]");
  if (tran_size % l2_line != 0) throw InputError("tran_size must be a multiple of l2_line");
  if (bank_count != 32) throw InputError("bank_count must be 32");
}

const std::vector<DeviceProfile>& builtin_profiles() {
  static const std::vector<DeviceProfile> profiles = {
      make("kepler-k20x", 14, 250e9, 732e6, 14, 358, 11, 50),
      make("maxwell-m40", 24, 288e9, 948e6, 2.5, 385, 1, 220),
      make("pascal-p100", 56, 732e9, 1328e6, 2.8, 485, 1, 260),
  };
  return profiles;
}

DeviceProfile builtin_profile(const std::string& name) {
  for (const auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw InputError("unknown device profile '" + name + "'");
}

DeviceProfile parse_profile(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("profile JSON: ") + e.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (v.is_string())
        kv.emplace_back(k, v.get<std::string>());
      else if (v.is_number())
        kv.emplace_back(k, v.dump());
      else
        throw InputError("profile key '" + k + "' must be a string or number");
    }
    return apply(kv);
  }
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("profile line " + std::to_string(lineno) + ": expected key=value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return apply(kv);
}

DeviceProfile load_profile_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open profile file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_profile(ss.str());
}

DeviceProfile resolve_profile(const std::string& name_or_path) {
  for (const auto& p : builtin_profiles())
    if (p.name == name_or_path) return p;
  if (std::filesystem::exists(name_or_path)) return load_profile_file(name_or_path);
  throw InputError("unknown device '" + name_or_path + "' (not a built-in name or a readable file)");
}

std::string profile_to_text(const DeviceProfile& p) {
  std::ostringstream os;
  os.precision(12);
  os << "name=" << p.name << '\n'
     << "n_sm=" << p.n_sm << '\n'
     << "mem_bw=" << p.mem_bw << '\n'
     << "freq=" << p.freq << '\n'
     << "delta=" << p.delta << '\n'
     << "mem_baselat=" << p.mem_baselat << '\n'
     << "shmem_lat=" << p.shmem_lat << '\n'
     << "cycles_ac=" << p.cycles_ac << '\n'
     << "shmem_capacity=" << p.shmem_capacity << '\n'
     << "bank_count=" << p.bank_count << '\n'
     << "bank_width=" << p.bank_width << '\n'
     << "tran_size=" << p.tran_size << '\n'
     << "l2_line=" << p.l2_line << '\n'
     << "cache_hit=" << p.cache_hit << '\n'
     << "max_warps_per_sm=" << p.max_warps_per_sm << '\n';
  return os.str();
}

}  // namespace ttplan
