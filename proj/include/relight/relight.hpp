// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relight/core.hpp"
#include "relight/envmap.hpp"
#include "relight/eval.hpp"
#include "relight/gbuffer.hpp"
#include "relight/hdr_merge.hpp"
#include "relight/image_io.hpp"
#include "relight/inverse.hpp"
#include "relight/manifest.hpp"
#include "relight/random.hpp"
#include "relight/renderer.hpp"
#include "relight/sync.hpp"
#include "relight/tonemap.hpp"
