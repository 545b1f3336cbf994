#include "grt/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "grt/errors.hpp"

namespace grt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key);
  }
}

std::size_t to_count(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size() || out < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(out);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad count value for " + key);
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean value for " + key);
}

// class order matches SemanticClass ids 1..5
constexpr const char* kClassKeys[5] = {"car", "pedestrian", "pedestrian_group",
                                       "bike", "truck"};

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.synth = SyntheticSceneConfig::benchmark_default();
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                ": " + msg);
  };

  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "optim" && section != "loss" &&
          section != "augment" && section != "data" && section != "synth") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (section.empty()) {
      if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_count(val, key));
      } else if (key == "threads") {
        cfg.threads = to_count(val, key);
      } else {
        fail("unknown top-level key " + key);
      }
    } else if (section == "model") {
      if (key == "stage_dims") {
        std::istringstream vs(val);
        std::string tok;
        std::size_t i = 0;
        while (std::getline(vs, tok, ',')) {
          if (i >= 5) fail("stage_dims takes exactly 5 entries");
          cfg.model.stage_dims[i++] = to_count(trim(tok), key);
        }
        if (i != 5) fail("stage_dims takes exactly 5 entries");
      } else if (key == "n_local") {
        cfg.model.n_local = to_count(val, key);
      } else if (key == "sampler_k") {
        cfg.model.sampler_k = to_count(val, key);
      } else if (key == "num_classes") {
        cfg.model.num_classes = to_count(val, key);
      } else if (key == "attention") {
        if (val == "gaussian") {
          cfg.model.attention = AttentionNorm::Gaussian;
        } else if (val == "softmax") {
          cfg.model.attention = AttentionNorm::Softmax;
        } else {
          fail("attention must be gaussian or softmax");
        }
      } else if (key == "down") {
        if (val == "attentive") {
          cfg.model.down = DownVariant::Attentive;
        } else if (val == "maxpool") {
          cfg.model.down = DownVariant::MaxPool;
        } else {
          fail("down must be attentive or maxpool");
        }
      } else if (key == "up") {
        if (val == "attentive") {
          cfg.model.up = UpVariant::Attentive;
        } else if (val == "trilinear") {
          cfg.model.up = UpVariant::Trilinear;
        } else {
          fail("up must be attentive or trilinear");
        }
      } else if (key == "features") {
        try {
          cfg.model.features = FeatureMask::parse(val);
        } catch (const std::exception& e) {
          fail(e.what());
        }
      } else {
        fail("unknown [model] key " + key);
      }
    } else if (section == "optim") {
      if (key == "lr0") {
        cfg.optim.lr0 = to_real(val, key);
      } else if (key == "momentum") {
        cfg.optim.momentum = to_real(val, key);
      } else if (key == "epochs") {
        cfg.optim.epochs = to_count(val, key);
      } else if (key == "batch_size") {
        cfg.optim.batch_size = to_count(val, key);
      } else if (key == "lr_min") {
        cfg.optim.lr_min = to_real(val, key);
      } else {
        fail("unknown [optim] key " + key);
      }
    } else if (section == "loss") {
      if (key == "static_weight") {
        cfg.static_weight = to_real(val, key);
      } else if (key == "moving_weight") {
        cfg.moving_weight = to_real(val, key);
      } else if (key == "lovasz") {
        cfg.lovasz = to_bool(val, key);
      } else {
        fail("unknown [loss] key " + key);
      }
    } else if (section == "augment") {
      if (key == "scale_lo") {
        cfg.augment.scale_lo = to_real(val, key);
      } else if (key == "scale_hi") {
        cfg.augment.scale_hi = to_real(val, key);
      } else if (key == "rotate") {
        cfg.augment.rotate = to_bool(val, key);
      } else if (key == "jitter_sigma") {
        cfg.augment.jitter_sigma = to_real(val, key);
      } else if (key == "instance_prob") {
        cfg.augment.instance_prob = to_real(val, key);
      } else {
        fail("unknown [augment] key " + key);
      }
    } else if (section == "data") {
      if (key == "train_manifest") {
        cfg.train_manifest = val;
      } else if (key == "val_manifest") {
        cfg.val_manifest = val;
      } else if (key == "feature_scaling") {
        if (val == "auto") {
          cfg.feature_scaling_auto = true;
        } else if (val == "none") {
          cfg.feature_scaling_auto = false;
        } else {
          fail("feature_scaling must be auto or none");
        }
      } else {
        fail("unknown [data] key " + key);
      }
    } else if (section == "synth") {
      if (key == "scenes") {
        cfg.synth_scenes = to_count(val, key);
      } else if (key == "profile") {
        if (val == "benchmark") {
          cfg.synth = SyntheticSceneConfig::benchmark_default();
        } else if (val == "dense") {
          cfg.synth = SyntheticSceneConfig::dense(256);
        } else {
          fail("profile must be benchmark or dense");
        }
      } else if (key == "region_half") {
        cfg.synth.region_half = to_real(val, key);
      } else if (key == "clutter_min") {
        cfg.synth.clutter_min = to_count(val, key);
      } else if (key == "clutter_max") {
        cfg.synth.clutter_max = to_count(val, key);
      } else if (key == "cluster_min") {
        cfg.synth.cluster_min = to_count(val, key);
      } else if (key == "cluster_max") {
        cfg.synth.cluster_max = to_count(val, key);
      } else {
        bool matched = false;
        for (std::size_t c = 0; c < 5 && !matched; ++c) {
          const std::string base = kClassKeys[c];
          if (key == base + "_min_count") {
            cfg.synth.classes[c].min_count = to_count(val, key);
            matched = true;
          } else if (key == base + "_max_count") {
            cfg.synth.classes[c].max_count = to_count(val, key);
            matched = true;
          }
        }
        if (!matched) fail("unknown [synth] key " + key);
      }
    }
  }
  cfg.model.validate();
  cfg.augment.validate();
  cfg.synth.validate();
  if (cfg.static_weight <= 0 || cfg.moving_weight <= 0) {
    throw std::invalid_argument("config: class weights must be positive");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str());
}

std::string echo_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "seed = " << cfg.seed << "\n";
  os << "threads = " << cfg.threads << "\n\n";
  os << "[model]\n";
  os << "stage_dims = ";
  for (std::size_t i = 0; i < 5; ++i) {
    os << (i ? "," : "") << cfg.model.stage_dims[i];
  }
  os << "\nn_local = " << cfg.model.n_local
     << "\nsampler_k = " << cfg.model.sampler_k
     << "\nnum_classes = " << cfg.model.num_classes << "\nattention = "
     << (cfg.model.attention == AttentionNorm::Gaussian ? "gaussian" : "softmax")
     << "\ndown = "
     << (cfg.model.down == DownVariant::Attentive ? "attentive" : "maxpool")
     << "\nup = "
     << (cfg.model.up == UpVariant::Attentive ? "attentive" : "trilinear")
     << "\nfeatures = " << cfg.model.features.str() << "\n\n";
  os << "[optim]\n";
  os << "lr0 = " << cfg.optim.lr0 << "\nmomentum = " << cfg.optim.momentum
     << "\nepochs = " << cfg.optim.epochs
     << "\nbatch_size = " << cfg.optim.batch_size
     << "\nlr_min = " << cfg.optim.lr_min << "\n\n";
  os << "[loss]\n";
  os << "static_weight = " << cfg.static_weight
     << "\nmoving_weight = " << cfg.moving_weight << "\nlovasz = "
     << (cfg.lovasz ? "true" : "false") << "\n\n";
  os << "[augment]\n";
  os << "scale_lo = " << cfg.augment.scale_lo
     << "\nscale_hi = " << cfg.augment.scale_hi << "\nrotate = "
     << (cfg.augment.rotate ? "true" : "false")
     << "\njitter_sigma = " << cfg.augment.jitter_sigma
     << "\ninstance_prob = " << cfg.augment.instance_prob << "\n\n";
  os << "[data]\n";
  if (!cfg.train_manifest.empty()) {
    os << "train_manifest = " << cfg.train_manifest << "\n";
  }
  if (!cfg.val_manifest.empty()) {
    os << "val_manifest = " << cfg.val_manifest << "\n";
  }
  os << "feature_scaling = " << (cfg.feature_scaling_auto ? "auto" : "none")
     << "\n\n";
  os << "[synth]\n";
  os << "scenes = " << cfg.synth_scenes
     << "\nregion_half = " << cfg.synth.region_half
     << "\nclutter_min = " << cfg.synth.clutter_min
     << "\nclutter_max = " << cfg.synth.clutter_max
     << "\ncluster_min = " << cfg.synth.cluster_min
     << "\ncluster_max = " << cfg.synth.cluster_max << "\n";
  for (std::size_t c = 0; c < 5; ++c) {
    os << kClassKeys[c] << "_min_count = " << cfg.synth.classes[c].min_count
       << "\n";
    os << kClassKeys[c] << "_max_count = " << cfg.synth.classes[c].max_count
       << "\n";
  }
  return os.str();
}

}  // namespace grt
