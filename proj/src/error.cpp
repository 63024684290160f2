// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/error.hpp"

namespace memdrive {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::Shape: return "shape";
    case ErrorCategory::Contract: return "contract";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numeric: return "numeric";
  }
  return "internal";
}

int category_exit_code(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Parse: return 3;
    case ErrorCategory::Io: return 4;
    case ErrorCategory::Shape: return 5;
    case ErrorCategory::Contract: return 6;
    case ErrorCategory::Numeric: return 7;
  }
  return 1;
}

}  // namespace memdrive
