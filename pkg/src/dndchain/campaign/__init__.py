"""Campaign execution, delivery reports, complaints, audits and the watch list."""
