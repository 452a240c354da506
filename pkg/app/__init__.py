# IRS-aided WPCN beamforming optimizer
