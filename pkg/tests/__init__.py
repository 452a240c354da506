# Tests for the IRS-WPCN optimizer
