#pragma once

namespace mfga {

enum class Task { kRegression, kClassification };

}  // namespace mfga
