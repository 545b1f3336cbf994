#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace grt {

// C x C counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const;
  std::uint64_t total() const;

  // valid_mask, when given, excludes entries (padding duplicates).
  void update(const std::vector<int>& predictions, const std::vector<int>& labels,
              const std::vector<bool>& valid_mask = {});
  void merge(const ConfusionMatrix& other);

 private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
};

struct ClassScores {
  std::vector<double> per_class;   // score, 0 when absent
  std::vector<bool> present;       // TP+FN+FP > 0
  double mean = 0.0;               // over present classes unless include_absent
};

// IoU_c = TP / (TP + FN + FP). Absent classes are excluded from the mean by
// default; include_absent folds them in as zeros (a fixed all-class mean).
ClassScores iou(const ConfusionMatrix& cm, bool include_absent = false);
// F1_c = 2 TP / (2 TP + FP + FN).
ClassScores f1(const ConfusionMatrix& cm, bool include_absent = false);

// Evaluation report: per-class IoU/F1, means and the raw matrix.
std::string format_report(const ConfusionMatrix& cm,
                          const std::vector<std::string>& class_names = {});

const std::vector<std::string>& radar_class_names();

}  // namespace grt
