"""Speaker embedding datasets: synthetic generation, splits, client shards and file I/O."""
