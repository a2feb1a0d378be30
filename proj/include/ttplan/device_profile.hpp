#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ttplan {

struct DeviceProfile {
  std::string name;
  int n_sm = 1;
  double mem_bw = 1.0;       // bytes/s
  double freq = 1.0;         // Hz
  double delta = 1.0;        // departure delay, cycles
  double mem_baselat = 1.0;  // cycles
  double shmem_lat = 1.0;    // cycles
  double cycles_ac = 0.0;    // cycles
  unsigned shmem_capacity = 48 * 1024;  // bytes per block
  unsigned bank_count = 32;
  unsigned bank_width = 4;
  unsigned tran_size = 128;
  unsigned l2_line = 32;
  double cache_hit = 0.2;
  int max_warps_per_sm = 64;

  void validate() const;
  std::uint64_t capacity_elements(unsigned element_size) const { return shmem_capacity / element_size; }
};

const std::vector<DeviceProfile>& builtin_profiles();
DeviceProfile builtin_profile(const std::string& name);

// Key=value text ("# comment" lines allowed) or a JSON object. Keys are the
// field names above; an optional "base" key names the built-in profile that
// supplies every field not given (default kepler-k20x).
DeviceProfile parse_profile(const std::string& text);
DeviceProfile load_profile_file(const std::string& path);

// Built-in name or path to a profile file.
DeviceProfile resolve_profile(const std::string& name_or_path);

std::string profile_to_text(const DeviceProfile& p);

}  // namespace ttplan
