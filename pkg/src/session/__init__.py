"""Run logging: metrics CSV and run summaries."""
