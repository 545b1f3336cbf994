#include "grt/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace grt {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes < 1) {
    throw std::invalid_argument("ConfusionMatrix: need at least one class");
  }
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t pred) const {
  return counts_[truth * num_classes_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::update(const std::vector<int>& predictions,
                             const std::vector<int>& labels,
                             const std::vector<bool>& valid_mask) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("ConfusionMatrix::update: length mismatch");
  }
  if (!valid_mask.empty() && valid_mask.size() != labels.size()) {
    throw std::invalid_argument("ConfusionMatrix::update: mask length mismatch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!valid_mask.empty() && !valid_mask[i]) continue;
    const int t = labels[i], p = predictions[i];
    if (t < 0 || static_cast<std::size_t>(t) >= num_classes_ || p < 0 ||
        static_cast<std::size_t>(p) >= num_classes_) {
      throw std::invalid_argument("ConfusionMatrix::update: id out of range");
    }
    ++counts_[static_cast<std::size_t>(t) * num_classes_ +
              static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

namespace {

struct TpFpFn {
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

TpFpFn tally(const ConfusionMatrix& cm, std::size_t c) {
  TpFpFn t;
  t.tp = cm.at(c, c);
  for (std::size_t o = 0; o < cm.num_classes(); ++o) {
    if (o == c) continue;
    t.fn += cm.at(c, o);
    t.fp += cm.at(o, c);
  }
  return t;
}

ClassScores score_classes(const ConfusionMatrix& cm, bool include_absent,
                          bool f1_mode) {
  ClassScores s;
  s.per_class.assign(cm.num_classes(), 0.0);
  s.present.assign(cm.num_classes(), false);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto t = tally(cm, c);
    const std::uint64_t support = t.tp + t.fp + t.fn;
    s.present[c] = support > 0;
    if (support > 0) {
      const double tp = static_cast<double>(t.tp);
      s.per_class[c] = f1_mode
                           ? 2.0 * tp / static_cast<double>(2 * t.tp + t.fp + t.fn)
                           : tp / static_cast<double>(support);
    }
    if (s.present[c] || include_absent) {
      sum += s.per_class[c];
      ++counted;
    }
  }
  s.mean = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  return s;
}

}  // namespace

ClassScores iou(const ConfusionMatrix& cm, bool include_absent) {
  return score_classes(cm, include_absent, false);
}

ClassScores f1(const ConfusionMatrix& cm, bool include_absent) {
  return score_classes(cm, include_absent, true);
}

const std::vector<std::string>& radar_class_names() {
  static const std::vector<std::string> names = {
      "static", "car", "pedestrian", "pedestrian_group", "bike", "truck"};
  return names;
}

std::string format_report(const ConfusionMatrix& cm,
                          const std::vector<std::string>& class_names) {
  const auto i = iou(cm);
  const auto f = f1(cm);
  std::string out;
  char buf[160];
  out += "class\tiou\tf1\tpresent\n";
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const std::string name = c < class_names.size()
                                 ? class_names[c]
                                 : "class" + std::to_string(c);
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%s\n", name.c_str(),
                  i.per_class[c], f.per_class[c], i.present[c] ? "yes" : "no");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU\t%.6f\nmacro_F1\t%.6f\n", i.mean, f.mean);
  out += buf;
  out += "confusion_matrix (rows truth, cols prediction)\n";
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    for (std::size_t p = 0; p < cm.num_classes(); ++p) {
      out += std::to_string(cm.at(t, p));
      out += p + 1 < cm.num_classes() ? '\t' : '\n';
    }
  }
  return out;
}

}  // namespace grt
