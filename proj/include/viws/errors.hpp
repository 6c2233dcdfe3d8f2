// Copyright 2026 The ViWS Authors. All Rights Reserved.
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

#pragma once

#include <stdexcept>
#include <string>

namespace viws {

// Raised for invalid user input (bad config, unreadable files). The CLI maps
// every subclass to exit code 1; anything else escaping is an internal error.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public UserError {
 public:
  using UserError::UserError;
};

class RangeError : public UserError {
 public:
  using UserError::UserError;
};

class ShapeError : public UserError {
 public:
  using UserError::UserError;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class LoadError : public UserError {
 public:
  using UserError::UserError;
};

}  // namespace viws
