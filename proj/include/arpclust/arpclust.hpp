#pragma once

#include "arpclust/arp_ingest.hpp"
#include "arpclust/autoencoder.hpp"
#include "arpclust/cluster_engine.hpp"
#include "arpclust/event_detector.hpp"
#include "arpclust/feature_builder.hpp"
#include "arpclust/pipeline.hpp"
#include "arpclust/sequence_binner.hpp"
#include "arpclust/synth_traffic.hpp"
